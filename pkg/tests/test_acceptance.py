"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line.

The lines are printed in the terminal summary (see conftest.py) and also
when this file is run directly.
"""
import math
import time

import numpy as np
import pytest

from gpclt.cli import dumps, run_verify
from gpclt.coefficients import compute_coefficients, shell_variation
from gpclt.config import load
from gpclt.fock import build_basis
from gpclt.lattice import Momentum, build_mode_set
from gpclt.limitlaw import (
    density_from_values,
    excited_char_fn,
    excited_density_1d,
    expectation_of_products,
    gaussian_density,
    interval_probability,
    invert_char_fn,
    limit_char_fn,
)
from gpclt.scattering import RadialPotential, scattering_length, solve_neumann, vf_deviation
from gpclt.verify import (
    ccr_report,
    s_ball,
    verify_excited_cf,
    verify_vacuum_cf,
    weyl_relation_report,
)

RESULTS: dict[int, tuple[bool, str]] = {}

SOFT = RadialPotential.soft_sphere(2.0, 0.5)
PAIR = [Momentum((1, 0, 0)), Momentum((-1, 0, 0))]
# <nu_1, nu_2> = 0.1 + 0.17i
NUS_COMPLEX = [np.array([0.5, 0.3j]), np.array([0.2 + 0.1j, -0.4])]
NUS_REAL = [np.array([0.5, 0.0]), np.array([0.3, 0.2])]


def record(k, ok, detail):
    RESULTS[k] = (bool(ok), detail)
    assert ok, detail


def _slope(x, y):
    return float(np.polyfit(np.log(x), np.log(np.abs(y)), 1)[0])


@pytest.fixture(scope="module")
def cf_basis():
    return build_basis(PAIR, 20, 40)


@pytest.fixture(scope="module")
def verify_bundle():
    return run_verify(load(None, {"seed": 0}))


def test_criterion_01_scattering_length():
    t0 = time.perf_counter()
    a0 = scattering_length(SOFT)
    dt = time.perf_counter() - t0
    err = abs(a0 - (0.5 - math.tanh(0.5)))
    record(1, err <= 1e-8 and dt < 1.0, f"|a0 - (R - tanh R)| = {err:.2e} (<= 1e-8), {dt:.3f} s (< 1 s)")


def test_criterion_02_vf_rate():
    t0 = time.perf_counter()
    Ns = [1e2, 1e3, 1e4, 1e5]
    devs = [vf_deviation(solve_neumann(SOFT, N, 0.49)) for N in Ns]
    dt = time.perf_counter() - t0
    s = _slope(Ns, devs)
    record(2, abs(s + 1) <= 0.15 and dt < 30, f"slope {s:.4f} (-1 +- 0.15), {dt:.1f} s (< 30 s)")


def test_criterion_03_coefficient_decay():
    co = compute_coefficients(solve_neumann(SOFT, 1000, 0.49), build_mode_set(8, 1000))
    r_eta = shell_variation(co.shell_max(co.eta, 2))
    r_tau = shell_variation(co.shell_max(co.tau, 4))
    record(3, r_eta < 3 and r_tau < 3, f"shell ratio |eta|p^2 {r_eta:.3f}, |tau|p^4 {r_tau:.3f} (< 3)")


def test_criterion_04_step4_rate():
    Ns = [1000, 2000, 4000, 8000]
    cos = [compute_coefficients(solve_neumann(SOFT, N, 0.49), build_mode_set(8, N)) for N in Ns]
    s = _slope(Ns, [c.step4_gap for c in cos])
    closed = max(c.closed_form_gap for c in cos)
    record(4, abs(s + 1) <= 0.2 and closed <= 1e-6,
           f"slope {s:.4f} (-1 +- 0.2), closed-form gap {closed:.2e} (<= 1e-6)")


def _s_list(nus):
    return s_ball(len(nus), 1.0 / max(np.linalg.norm(v) for v in nus))


def test_criterion_05_vacuum_identity(cf_basis):
    t0 = time.perf_counter()
    reps = [verify_vacuum_cf(cf_basis, nus, _s_list(nus)) for nus in (NUS_COMPLEX, NUS_REAL)]
    dt = time.perf_counter() - t0
    dev = max(r.deviation for r in reps)
    record(5, dev <= 1e-6 and dt < 60, f"max deviation {dev:.2e} (<= 1e-6, complex and real Sigma), {dt:.1f} s")


def test_criterion_06_excited_identity(cf_basis):
    s = _s_list(NUS_COMPLEX)
    printed = verify_excited_cf(cf_basis, NUS_COMPLEX, PAIR[0], s, printed_sign=True).deviation
    derived = verify_excited_cf(cf_basis, NUS_COMPLEX, PAIR[0], s).deviation
    grid = np.linspace(-8, 8, 801)
    var, nu_p = 1.0, math.sqrt(0.4)
    ex = invert_char_fn(lambda t: excited_char_fn([[var]], [nu_p], t), grid)
    wide = np.linspace(-16, 16, 1601)
    norm = invert_char_fn(lambda t: excited_char_fn([[var]], [nu_p], t), wide).normalization
    gap = float(np.max(np.abs(ex.values - excited_density_1d(grid, var, nu_p**2))))
    ok = printed <= 1e-6 and abs(norm - 1) <= 1e-8 and gap <= 1e-6
    record(6, ok, f"deviation vs (1 + |.|^2) factor {printed:.2e} (<= 1e-6); "
                  f"vs (1 - |.|^2) factor {derived:.2e}; density normalization {norm:.10f}, "
                  f"closed-form gap {gap:.2e}")


def test_criterion_07_exact_algebra():
    cfg = load(None).fock
    cub = cfg["cubic"]
    cubic_modes = [Momentum(tuple(m)) for m in cub["modes"]]
    bases = [build_basis(PAIR, cfg["n_max"], cfg["N"]), build_basis(PAIR, 20, 40)]
    bases += [build_basis(PAIR, N, N) for N in cfg["N_sweep"]]
    bases += [build_basis(cubic_modes, cub["n_max"], N) for N in cfg["N_sweep"]]
    dev = max(ccr_report(b).deviation for b in bases)
    record(7, dev <= 1e-12, f"max commutator residual {dev:.2e} over {len(bases)} bases (<= 1e-12)")


def test_criterion_08_weyl_relation(cf_basis):
    rng = np.random.default_rng([0, 99])
    f = 0.2 * (rng.standard_normal(2) + 1j * rng.standard_normal(2))
    g = 0.2 * (rng.standard_normal(2) + 1j * rng.standard_normal(2))
    dev = weyl_relation_report(cf_basis, f, g).deviation
    record(8, dev <= 1e-8, f"residual {dev:.2e} (<= 1e-8)")


def test_criterion_09_bound_suite(verify_bundle):
    bounds = verify_bundle.documents["verify"]["bounds"]
    names = {b["name"] for b in bounds}
    need = {"number-growth-under-T", "number-growth-under-cubic-phase", "bogoliubov-residual",
            "commutator-b-with-cubic", "number-growth-under-weyl"}
    ok = need <= names and all(
        b["passed"] and b["samples"] >= 200 and b["seed"] is not None
        and all(np.isfinite(v) for v in b["constants"].values())
        and sorted(float(k) for k in b["constants"]) == [10, 20, 40, 80]
        for b in bounds)
    worst = max(b["drift"] for b in bounds)
    record(9, ok, f"{len(bounds)} fitted bounds, worst drift {worst:.3f} (< 2), samples >= 200")


def test_criterion_10_limit_pipeline():
    grid = np.linspace(-8, 8, 801)
    d = invert_char_fn(lambda s: limit_char_fn([[1.0]], s), grid)
    sup = float(np.max(np.abs(d.values - gaussian_density([[1.0]], grid))))
    p = interval_probability(d, -1.96, 1.96)
    # E exp(-X^2) for X ~ N(0, 0.8) by the Fourier route and by direct integration
    ghat = lambda s: np.exp(-s**2 / 4) / math.sqrt(4 * math.pi)
    fourier = expectation_of_products([ghat], [[0.8]]).value
    direct = density_from_values(grid, gaussian_density([[0.8]], grid) * np.exp(-grid**2)).normalization
    route = abs(fourier - direct)
    ok = sup <= 1e-6 and abs(p - 0.95) <= 5e-4 and route <= 1e-8
    record(10, ok, f"density sup gap {sup:.2e}, P(+-1.96 sigma) = {p:.7f}, route gap {route:.2e}")


def test_criterion_11_determinism(verify_bundle):
    again = run_verify(load(None, {"seed": 0}))
    a = dumps(verify_bundle.documents["verify"]).encode()
    b = dumps(again.documents["verify"]).encode()
    record(11, a == b, f"verify JSON byte-identical ({len(a)} bytes)")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
