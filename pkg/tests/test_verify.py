import numpy as np
import pytest

from gpclt.fock import build_basis
from gpclt.lattice import Momentum
from gpclt.verify import (
    BoundReport,
    IdentityReport,
    ccr_report,
    fit_tnt,
    s_ball,
    verify_excited_cf,
    verify_vacuum_cf,
    weyl_relation_report,
)

PAIR = [Momentum((1, 0, 0)), Momentum((-1, 0, 0))]
NUS = [np.array([0.5, 0.3j]), np.array([0.2 + 0.1j, -0.4])]


@pytest.fixture(scope="module")
def cf_basis():
    return build_basis(PAIR, 20, 40)


def test_ccr_pass():
    r = ccr_report(build_basis(PAIR, 10, 40))
    assert r.passed and r.deviation < 1e-12


def test_weyl_relation(cf_basis):
    rng = np.random.default_rng([0, 99])
    f = 0.2 * (rng.standard_normal(2) + 1j * rng.standard_normal(2))
    g = 0.2 * (rng.standard_normal(2) + 1j * rng.standard_normal(2))
    assert weyl_relation_report(cf_basis, f, g).passed


def test_vacuum_cf(cf_basis):
    s = s_ball(2, 1.0 / max(np.linalg.norm(v) for v in NUS))
    r = verify_vacuum_cf(cf_basis, NUS, s)
    assert r.passed and r.details["conclusive"]
    assert r.deviation < 1e-6


def test_excited_cf_sign(cf_basis):
    s = s_ball(2, 1.0 / max(np.linalg.norm(v) for v in NUS))
    good = verify_excited_cf(cf_basis, NUS, PAIR[0], s)
    bad = verify_excited_cf(cf_basis, NUS, PAIR[0], s, printed_sign=True)
    assert good.passed
    assert not bad.passed and bad.deviation > 0.1


def test_s_ball():
    pts = s_ball(3, 2.0)
    assert np.all(np.linalg.norm(pts, axis=1) <= 2.0 + 1e-12)
    assert np.all(pts[0] == 0)
    assert s_ball(1, 1.0).shape == (9, 1)


def test_bound_report_logic():
    r = BoundReport("x", "x", {}, 0, 200, {10: 1.0, 20: 1.5})
    assert r.drift == 1.5 and r.passed
    assert not BoundReport("x", "x", {}, 0, 199, {10: 1.0}).passed
    assert not BoundReport("x", "x", {}, 0, 200, {10: 1.0, 20: 0.0}).passed
    d = r.to_dict()
    assert d["constants"] == {"10": 1.0, "20": 1.5} and d["passed"]
    assert IdentityReport("i", "i", {}, 1e-3, 1e-2).to_dict()["passed"]


def test_tnt_fit_reproducible():
    a = fit_tnt(PAIR, [10, 20, 40], 0.3, 1, 200, seed=5)
    b = fit_tnt(PAIR, [10, 20, 40], 0.3, 1, 200, seed=5)
    assert a.constants == b.constants
    assert a.passed
