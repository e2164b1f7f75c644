import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gpclt.lattice import Momentum, build_mode_set
from gpclt.observables import (
    NuVector,
    cosine,
    dressed_vector,
    from_multiplier,
    momentum_diagonal,
    multiplier_sup_norm,
    observable_from_config,
    plane_wave,
    vector_distance,
)

MODES = build_mode_set(2, 100)
n0 = (1, 0, 0)
p0, m0 = Momentum(n0), Momentum((-1, 0, 0))


def _support(spec):
    return {spec.modes.modes[i].n for i in np.flatnonzero(spec.fhat)}


def test_constant_multiplier():
    spec = from_multiplier({(0, 0, 0): 1.0}, MODES)
    assert spec.mean == 1.0
    assert not np.any(spec.fhat)
    assert spec.norm_bound == pytest.approx(1.0)


def test_cosine():
    spec = cosine(n0, MODES)
    assert spec.mean == 0
    assert _support(spec) == {(1, 0, 0), (-1, 0, 0)}
    assert spec.fhat[MODES.index(p0)] == 1 and spec.fhat[MODES.index(m0)] == 1
    assert spec.norm_bound == 2.0
    assert multiplier_sup_norm({n0: 1.0, (-1, 0, 0): 1.0}) == pytest.approx(2.0)


def test_plane_wave():
    spec = plane_wave(n0, MODES)
    assert spec.fhat[MODES.index(p0)] == 1
    assert spec.fbarhat[MODES.index(m0)] == 1
    assert np.count_nonzero(spec.fhat) == 1 and np.count_nonzero(spec.fbarhat) == 1


def test_asymmetric_support_rejected():
    with pytest.raises(ValueError, match="asymmetric"):
        from_multiplier({n0: 1.0}, MODES)


def test_tail_recorded():
    spec = from_multiplier({(5, 0, 0): 0.5, (-5, 0, 0): 0.5, n0: 1.0, (-1, 0, 0): 1.0}, MODES)
    assert spec.tail_sq == pytest.approx(0.5)


def test_momentum_diagonal_degenerate():
    spec = momentum_diagonal(2.0, MODES)
    assert spec.mean == 2.0 and not np.any(spec.fhat)


coeffs = st.dictionaries(
    st.tuples(*[st.integers(-2, 2)] * 3).filter(lambda n: n != (0, 0, 0)),
    st.complex_numbers(max_magnitude=3, allow_nan=False, allow_infinity=False),
    max_size=5,
)


def _symmetrize(c, real=False):
    out = {}
    for n, v in c.items():
        neg = tuple(-x for x in n)
        out[n] = v
        if real:
            out[neg] = np.conj(v)
        else:
            out.setdefault(neg, 0.0)
    return out


@given(coeffs)
def test_fbarhat_invariant(c):
    spec = from_multiplier(_symmetrize(c), MODES, norm_bound=1.0)
    np.testing.assert_array_equal(spec.fbarhat, np.conj(spec.fhat[MODES.neg_index]))


@given(coeffs, st.floats(-1, 0))
def test_self_adjoint_symmetry(c, a):
    spec = from_multiplier(_symmetrize(c, real=True), MODES, norm_bound=1.0)
    nu = dressed_vector(spec, np.full(len(MODES), a))
    np.testing.assert_allclose(nu.values[MODES.neg_index], np.conj(nu.values), atol=1e-15)


def test_dressed_vector_examples():
    spec = cosine(n0, MODES)
    v = dressed_vector(spec, np.zeros(len(MODES)))
    np.testing.assert_array_equal(v.values, spec.fhat)
    a = -0.37
    v = dressed_vector(spec, np.full(len(MODES), a))
    assert v.at(p0) == pytest.approx(math.exp(a))
    assert v.norm_sq == pytest.approx(2 * math.exp(2 * a))


def test_dressed_vector_norm_bound():
    rng = np.random.default_rng(1)
    c = {n: complex(*rng.standard_normal(2)) for n in [(1, 0, 0), (0, 1, 1), (2, -1, 0)]}
    spec = from_multiplier(_symmetrize(c), MODES, norm_bound=1.0)
    ang = rng.uniform(-0.5, 0.5, len(MODES))
    v = dressed_vector(spec, ang)
    direct = math.sqrt(sum(abs(spec.fhat[i] * math.cosh(ang[i]) + spec.fbarhat[i] * math.sinh(ang[i])) ** 2
                           for i in range(len(MODES))))
    assert v.norm == pytest.approx(direct, rel=1e-14)
    bound = math.exp(np.abs(ang).max()) * math.sqrt(np.sum(np.abs(spec.fhat) ** 2 + np.abs(spec.fbarhat) ** 2))
    assert v.norm <= bound


@settings(max_examples=50)
@given(st.floats(-2, 0))
def test_negative_angle_contracts_cosine(a):
    spec = cosine(n0, MODES)
    v = dressed_vector(spec, np.full(len(MODES), a))
    assert np.all(np.abs(v.values) <= np.abs(spec.fhat) + np.abs(spec.fbarhat))
    assert np.all(np.abs(v.values) <= np.abs(spec.fhat) + 1e-15)


def test_dressed_vector_shape_check():
    with pytest.raises(ValueError):
        dressed_vector(cosine(n0, MODES), np.zeros(3))


def test_vector_distance():
    one = build_mode_set(1, 1)
    a = NuVector(one, np.zeros(len(one), complex))
    b = NuVector(one, np.zeros(len(one), complex))
    a.values[0], b.values[0] = 3, 4
    assert vector_distance(a, b) == 1
    assert vector_distance(a, a) == 0
    with pytest.raises(ValueError):
        vector_distance(a, NuVector(MODES, np.zeros(len(MODES))))


def test_step4_distance_halves(soft):
    from gpclt.coefficients import compute_coefficients
    from gpclt.scattering import solve_neumann

    ds = []
    for N in (1000, 2000, 4000):
        modes = build_mode_set(2, N)
        co = compute_coefficients(solve_neumann(soft, N, 0.49), modes)
        spec = cosine(n0, modes)
        ds.append(vector_distance(dressed_vector(spec, co.mu), dressed_vector(spec, co.eta + co.tau)))
    for x, y in zip(ds, ds[1:]):
        assert 0.4 <= y / x <= 0.6


def test_config_entries():
    assert observable_from_config({"preset": "cos", "n0": [1, 0, 0]}, MODES).norm_bound == 2
    spec = observable_from_config({"coefficients": [[[1, 0, 0], 0.5, 0.5], [[-1, 0, 0], 0.5, -0.5]]}, MODES)
    assert spec.fhat[MODES.index(p0)] == 0.5 + 0.5j
    with pytest.raises(KeyError):
        observable_from_config({}, MODES)
