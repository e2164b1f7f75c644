import math
import time

import numpy as np
import pytest

from gpclt.scattering import (
    CACHE_ENV,
    RadialPotential,
    ScatteringError,
    ScatteringSolution,
    Vf_hat,
    integral_Vf,
    scattering_length,
    scattering_length_report,
    solve_neumann,
    solve_neumann_cached,
    vf_deviation,
    w_hat,
)

from oracles import SoftSphereNeumann, soft_sphere_a0


def test_a0_soft_sphere_closed_form(soft):
    t0 = time.perf_counter()
    a0 = scattering_length(soft)
    assert time.perf_counter() - t0 < 1.0
    assert abs(a0 - (0.5 - math.tanh(0.5))) <= 1e-8
    assert a0 == pytest.approx(0.0378828, abs=5e-8)


def test_a0_zero_potential():
    assert scattering_length(RadialPotential.zero()) == 0.0


def test_a0_weak_coupling_matches_born():
    V = RadialPotential.soft_sphere(0.01, 1.0)
    a0 = scattering_length(V)
    born = 0.01 * (4 * math.pi / 3) / (8 * math.pi)
    assert abs(a0 - soft_sphere_a0(0.01, 1.0)) < 1e-12
    assert abs(a0 / born - 1) < 5e-3


@pytest.mark.parametrize("v0,R", [(2.0, 0.5), (10.0, 1.0), (0.3, 2.0)])
def test_a0_grid_richardson_ratio(v0, R):
    V = RadialPotential.soft_sphere(v0, R)
    exact = soft_sphere_a0(v0, R)
    errs = [abs(scattering_length(V, grid=n) - exact) for n in (4, 8, 16)]
    assert errs[0] / errs[1] >= 3.5
    assert errs[1] / errs[2] >= 3.5


def test_a0_outer_region_constant(soft):
    rep = scattering_length_report(soft, r_max=10.0)
    assert rep.spread < 1e-12
    assert len(rep.a0_outer) >= 5


def test_a0_rejects_short_range(soft):
    with pytest.raises(ValueError):
        scattering_length(soft, r_max=0.6)


def test_tabulated_constant_matches_soft_sphere():
    V = RadialPotential.tabulated([0.0, 0.25, 0.5], [2.0, 2.0, 2.0])
    assert abs(scattering_length(V) - soft_sphere_a0(2.0, 0.5)) < 1e-10


def test_potential_validation():
    with pytest.raises(ValueError):
        RadialPotential.soft_sphere(-1.0, 1.0)
    with pytest.raises(ValueError):
        RadialPotential.tabulated([0.0, 1.0], [1.0, -1.0])
    with pytest.raises(ValueError):
        RadialPotential.tabulated([0.0, 0.0], [1.0, 1.0])


@pytest.mark.parametrize("N", [20, 100, 1000])
def test_neumann_eigenvalue_vs_closed_form(soft, N):
    sol = solve_neumann(soft, N, 0.49)
    ref = SoftSphereNeumann(2.0, 0.5, N * 0.49)
    assert sol.lam == pytest.approx(float(ref.lam), rel=1e-9)
    assert sol.integral_Vf == pytest.approx(float(ref.integral_Vf()), rel=1e-10)
    r = np.array([0.0, 0.1, 0.3, 0.5, 1.0, 5.0, N * 0.49])
    np.testing.assert_allclose(sol.f_at(r), [float(ref.f(x)) for x in r], rtol=1e-9)


def test_neumann_zero_potential():
    sol = solve_neumann(RadialPotential.zero(0.5), 100)
    assert sol.lam == 0.0
    np.testing.assert_allclose(sol.f_inner, 1.0)
    np.testing.assert_allclose(sol.f_outer, 1.0)
    assert integral_Vf(sol) == 0.0
    assert vf_deviation(sol) == 0.0
    np.testing.assert_allclose(w_hat(sol, [0.0, 1.0, 5.0]), 0.0, atol=1e-12)
    np.testing.assert_allclose(Vf_hat(sol, [0.0, 1.0]), 0.0)


def test_neumann_normalization_and_monotone(sol100):
    assert sol100.f_at(np.array([sol100.D]))[0] == pytest.approx(1.0, abs=1e-14)
    assert sol100.lam >= 0
    assert np.all(np.diff(sol100.f_outer) > 0)
    assert np.all(sol100.f_inner > 0)


def test_integral_vf_near_8pi_a0(soft):
    sol = solve_neumann(soft, 50 / 0.49, 0.49)
    assert abs(sol.integral_Vf / (8 * math.pi * sol.a0) - 1) < 0.03


def test_deviation_positive_and_halves(soft):
    devs = []
    for N in (100, 200, 400, 800):
        sol = solve_neumann(soft, N, 0.49)
        dev = sol.integral_Vf - 8 * math.pi * sol.a0
        assert dev > 0
        devs.append(dev)
    for a, b in zip(devs, devs[1:]):
        assert 0.8 * 0.5 <= b / a <= 1.2 * 0.5


def test_lambda_decreases_with_D(soft):
    lams = [solve_neumann(soft, N, 0.49).lam for N in (10, 20, 40, 80, 160)]
    assert all(b < a for a, b in zip(lams, lams[1:]))


def test_f_converges_to_zero_energy_profile(soft):
    kappa = 1.0
    r = np.linspace(0.01, 0.5, 50)
    # zero-energy solution normalized like f(r) -> 1 at infinity: u / (r - a0) scaling
    a0 = soft_sphere_a0(2.0, 0.5)
    uR = math.sinh(kappa * 0.5)
    duR = kappa * math.cosh(kappa * 0.5)
    zero_energy = np.sinh(kappa * r) / r / duR
    gaps = []
    for N in (20, 80, 320):
        sol = solve_neumann(soft, N, 0.49)
        gaps.append(np.max(np.abs(sol.f_at(r) - zero_energy)))
    assert gaps[0] > gaps[1] > gaps[2]
    assert uR / duR == pytest.approx(0.5 - a0)


def test_neumann_errors(soft):
    with pytest.raises(ValueError):
        solve_neumann(soft, 100, 0.5)
    with pytest.raises(ValueError):
        solve_neumann(soft, 100, 0.0)
    with pytest.raises(ValueError):
        solve_neumann(soft, 1, 0.49)  # D = 0.49 < R
    with pytest.raises(ValueError):
        solve_neumann(soft, 100, 0.49, grid=1001)


def test_w_hat_zero_vs_quadrature_oracle(soft):
    sol = solve_neumann(soft, 50 / 0.49, 0.49)
    ref = SoftSphereNeumann(2.0, 0.5, 50.0)
    assert abs(w_hat(sol, 0.0)[0] - ref.w_hat(0.0)) <= 1e-8 * abs(ref.w_hat(0.0))


def test_w_hat_decay(sol100):
    ref = SoftSphereNeumann(2.0, 0.5, 49.0)
    k = np.array([1.0, 2.0, 4.0, 8.0, 16.0])
    vals = w_hat(sol100, k)
    np.testing.assert_allclose(vals, [ref.w_hat(x) for x in k], rtol=1e-8)
    scaled = np.abs(vals) * k**2
    assert np.all(np.diff(scaled) < 0)  # |w_hat| k^2 bounded by its small-k value


def test_w_hat_refuses_unresolved_wavenumber(sol100):
    with pytest.raises(ValueError, match="not resolved"):
        w_hat(sol100, 400.0)


def test_vf_hat_small_k(sol100):
    assert Vf_hat(sol100, 0.0)[0] == sol100.integral_Vf
    k = np.array([1e-3, 2e-3, 4e-3])
    diff = np.abs(Vf_hat(sol100, k) - sol100.integral_Vf)
    # sin(kr)/(kr) = 1 - (kr)^2/6 + ...: quadratic departure at the origin, well inside linear growth
    np.testing.assert_allclose(diff[1:] / diff[:-1], 4.0, rtol=1e-3)
    assert np.all(diff <= 8 * math.pi * sol100.a0 * k)


def test_cache_roundtrip(soft, tmp_path, monkeypatch):
    monkeypatch.setenv(CACHE_ENV, str(tmp_path))
    a = solve_neumann_cached(soft, 60, 0.49, grid=512, n_outer=512)
    files = list(tmp_path.glob("*.json"))
    assert len(files) == 1
    b = solve_neumann_cached(soft, 60, 0.49, grid=512, n_outer=512)
    assert b.lam == a.lam and b.a0 == a.a0
    np.testing.assert_array_equal(b.f_inner, a.f_inner)
    assert w_hat(b, 1.0)[0] == w_hat(a, 1.0)[0]


def test_cache_rejects_schema_mismatch(sol100):
    d = sol100.to_dict()
    d["schema"] = -1
    with pytest.raises(ValueError):
        ScatteringSolution.from_dict(d)


def test_scattering_error_type():
    assert issubclass(ScatteringError, RuntimeError)
