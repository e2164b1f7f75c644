"""Numerical certification of the Fock-space identities and bounds.

Exact identities are checked as residuals on the occupation-margin subspace.
Existential bounds ``LHS <= C * RHS`` are fitted: C is the largest ratio over
a batch of seeded random states, and the report records how C drifts along a
sweep of the particle number N.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .fock import (
    FockBasis,
    FockOperator,
    apply_exp,
    annihilator,
    build_basis,
    bogoliubov,
    column_norms,
    commutator,
    creator,
    cubic_A,
    exp_op,
    field_op,
    modified_annihilator,
    modified_creator,
    number_op,
    random_states,
    residual_d,
    smeared_annihilator,
    weyl,
)
from .lattice import Momentum, negate
from .limitlaw import covariance, excited_char_fn, limit_char_fn
from .observables import NuVector

CCR_TOL = 1e-12
WEYL_TOL = 1e-8
CF_TOL = 1e-6
DRIFT_TOL = 2.0
MIN_SAMPLES = 200


@dataclass
class IdentityReport:
    name: str
    identity: str
    params: dict
    deviation: float
    threshold: float
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.deviation <= self.threshold)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


@dataclass
class BoundReport:
    name: str
    bound: str
    params: dict
    seed: int
    samples: int
    constants: dict  # N -> fitted C
    threshold: float = DRIFT_TOL

    @property
    def drift(self) -> float:
        vals = np.array(list(self.constants.values()), dtype=float)
        if not np.all(np.isfinite(vals)) or vals.min() <= 0:
            return float("inf")
        return float(vals.max() / vals.min())

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.drift) and self.drift < self.threshold and self.samples >= MIN_SAMPLES)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["constants"] = {str(k): v for k, v in self.constants.items()}
        d["drift"] = self.drift
        d["passed"] = self.passed
        return d


def _rng(seed: int, *stream: int) -> np.random.Generator:
    # one independent stream per (check, sweep point)
    return np.random.default_rng([seed, *stream])


def _restrict(M, cols):
    return M.tocsc()[:, cols].toarray()


# ---------------------------------------------------------------------------
# exact algebra


def ccr_residuals(basis: FockBasis) -> dict:
    """Max residual of the canonical and modified commutation relations on the margin."""
    margin = basis.margin(1)
    N = basis.N
    n_op = number_op(basis)
    eye = np.eye(basis.dim)[:, margin]
    a = {p: annihilator(basis, p) for p in basis.modes}
    b = {p: modified_annihilator(basis, p) for p in basis.modes}
    res = {"[a_p,a*_q]": 0.0, "[a_p,a_q]": 0.0, "[b_p,b*_q]": 0.0, "[b_p,b_q]": 0.0}
    for p in basis.modes:
        for q in basis.modes:
            delta = 1.0 if p == q else 0.0
            r = _restrict(commutator(a[p], a[q].H).mat, margin) - delta * eye
            res["[a_p,a*_q]"] = max(res["[a_p,a*_q]"], float(np.abs(r).max()))
            r = _restrict(commutator(a[p], a[q]).mat, margin)
            res["[a_p,a_q]"] = max(res["[a_p,a_q]"], float(np.abs(r).max()))
            expected = delta * (eye - _restrict(n_op.mat, margin) / N) - _restrict((a[q].H @ a[p]).mat, margin) / N
            r = _restrict(commutator(b[p], b[q].H).mat, margin) - expected
            res["[b_p,b*_q]"] = max(res["[b_p,b*_q]"], float(np.abs(r).max()))
            r = _restrict(commutator(b[p], b[q]).mat, margin)
            res["[b_p,b_q]"] = max(res["[b_p,b_q]"], float(np.abs(r).max()))
    return res


def ccr_report(basis: FockBasis) -> IdentityReport:
    res = ccr_residuals(basis)
    return IdentityReport(
        name="commutation-relations",
        identity="[a_p,a*_q] = delta_pq; [b_p,b*_q] = delta_pq (1 - N_+/N) - a*_q a_p / N; [b_p,b_q] = 0",
        params={"modes": [list(p.n) for p in basis.modes], "n_max": basis.n_max, "N": basis.N},
        deviation=max(res.values()),
        threshold=CCR_TOL,
        details=res,
    )


def weyl_relation_residual(basis: FockBasis, f, g, margin_depth: int | None = None) -> float:
    """|| (e^{i phi(f)} e^{i phi(g)} - e^{-i Im<f,g>} e^{i phi(f+g)}) restricted to the margin ||_max."""
    f = np.asarray(f, dtype=complex)
    g = np.asarray(g, dtype=complex)
    depth = 3 * basis.n_max // 4 if margin_depth is None else margin_depth
    cols = basis.margin(depth)
    Wf, Wg, Wfg = weyl(basis, f), weyl(basis, g), weyl(basis, f + g)
    phase = np.exp(-1j * np.vdot(f, g).imag)
    lhs = Wf.mat @ _restrict(Wg.mat, cols)
    rhs = phase * _restrict(Wfg.mat, cols)
    return float(np.abs(lhs - rhs).max())


def weyl_relation_report(basis: FockBasis, f, g, margin_depth: int | None = None) -> IdentityReport:
    depth = 3 * basis.n_max // 4 if margin_depth is None else margin_depth
    dev = weyl_relation_residual(basis, f, g, depth)
    return IdentityReport(
        name="weyl-relation",
        identity="e^{i phi_a(f)} e^{i phi_a(g)} = e^{i phi_a(f+g)} e^{-i Im<f,g>}",
        params={"n_max": basis.n_max, "margin_depth": depth, "f": _cplx(f), "g": _cplx(g)},
        deviation=dev,
        threshold=WEYL_TOL,
    )


def _cplx(v) -> list:
    return [[float(np.real(x)), float(np.imag(x))] for x in np.asarray(v).reshape(-1)]


def _weyl_product(basis: FockBasis, nus, s, vec, spectra=None):
    """prod_j exp(i s_j phi_a(nu_j)) applied to vec (rightmost factor first).

    ``spectra`` caches the eigendecomposition of each field operator so a
    sweep over many s costs one diagonalization per nu.
    """
    if spectra is None:
        spectra = [np.linalg.eigh(field_op(basis, nu).dense()) for nu in nus]
    out = np.asarray(vec, dtype=complex)
    for (w, U), sj in reversed(list(zip(spectra, s))):
        if sj != 0:
            out = U @ (np.exp(1j * sj * w) * (U.conj().T @ out))
    return out


def _as_arrays(basis: FockBasis, nus):
    out = []
    for nu in nus:
        if isinstance(nu, NuVector):
            vals = np.zeros(basis.m, dtype=complex)
            for p, x in zip(nu.modes.modes, nu.values):
                if x != 0:
                    vals[basis.mode_index(p)] = x
            out.append(vals)
        else:
            out.append(np.asarray(nu, dtype=complex).reshape(-1))
    return out


def _cov_from_arrays(arrs) -> np.ndarray:
    k = len(arrs)
    S = np.empty((k, k), dtype=complex)
    for i in range(k):
        for j in range(k):
            a, b = (i, j) if i <= j else (j, i)
            S[i, j] = np.vdot(arrs[a], arrs[b])
    return S


def s_ball(k: int, radius: float, n_dir: int = 12, radii=(0.25, 0.5, 0.75, 1.0)) -> np.ndarray:
    """Deterministic sample of s vectors with ||s|| <= radius (includes s = 0)."""
    pts = [np.zeros(k)]
    if k == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        angles = np.linspace(0, 2 * np.pi, n_dir, endpoint=False)
        base = np.stack([np.cos(angles), np.sin(angles)], axis=1)
        dirs = np.zeros((n_dir, k))
        dirs[:, :2] = base
        if k > 2:
            extra = np.eye(k)[2:]
            dirs = np.concatenate([dirs, extra, -extra])
    for r in radii:
        pts.extend(r * radius * d for d in dirs)
    return np.array(pts)


def _cf_deviation(basis, nus, s_list, p=None, printed_sign=False):
    arrs = _as_arrays(basis, nus)
    S = _cov_from_arrays(arrs)
    if p is None:
        vec = basis.vacuum()
    else:
        vec = creator(basis, p) @ basis.vacuum()
        c = np.array([a[basis.mode_index(p)] for a in arrs])
    spectra = [np.linalg.eigh(field_op(basis, a).dense()) for a in arrs]
    worst = 0.0
    for s in s_list:
        numeric = np.vdot(vec, _weyl_product(basis, arrs, s, vec, spectra))
        if p is None:
            exact = limit_char_fn(S, s)
        elif printed_sign:
            exact = limit_char_fn(S, s) * (1.0 + abs(np.dot(s, c)) ** 2)
        else:
            exact = excited_char_fn(S, c, s)
        worst = max(worst, abs(numeric - exact))
    return worst, S


def _cf_report(name, identity, basis, nus, s_list, p, printed_sign=False, ladder=(8, 4)):
    dev, S = _cf_deviation(basis, nus, s_list, p, printed_sign)
    # truncation evidence: the deviation should not grow as n_max increases
    trail = {}
    for step in ladder:
        n_small = basis.n_max - step
        if n_small >= 2:
            small = build_basis(basis.modes, n_small, basis.N)
            trail[n_small] = float(_cf_deviation(small, nus, s_list, p, printed_sign)[0])
    trail[basis.n_max] = float(dev)
    values = [trail[n] for n in sorted(trail)]
    monotone = all(b <= a * 10 + 1e-14 for a, b in zip(values, values[1:]))
    return IdentityReport(
        name=name,
        identity=identity,
        params={"n_max": basis.n_max, "N": basis.N, "modes": [list(q.n) for q in basis.modes],
                "s_count": len(s_list), "p": None if p is None else list(p.n),
                "sigma_re": S.real.tolist(), "sigma_im": S.imag.tolist()},
        deviation=float(dev),
        threshold=CF_TOL,
        details={"deviation_by_n_max": {str(k): v for k, v in sorted(trail.items())},
                 "conclusive": bool(monotone)},
    )


def verify_vacuum_cf(basis: FockBasis, nus, s_list) -> IdentityReport:
    return _cf_report("vacuum-characteristic-function",
                      "<Omega, prod_j e^{i s_j phi_a(nu_j)} Omega> = e^{-1/2 sum s_l s_j Sigma_lj}",
                      basis, nus, s_list, None)


def verify_excited_cf(basis: FockBasis, nus, p: Momentum, s_list, printed_sign: bool = False) -> IdentityReport:
    """Excited-state check; ``printed_sign`` compares against the factor (1 + |.|^2) instead of (1 - |.|^2)."""
    factor = "(1 + |sum_j s_j nu_j(p)|^2)" if printed_sign else "(1 - |sum_j s_j nu_j(p)|^2)"
    return _cf_report("excited-characteristic-function" + ("-printed-sign" if printed_sign else ""),
                      "<a*_p Omega, prod_j e^{i s_j phi_a(nu_j)} a*_p Omega> = e^{-1/2 s.Sigma.s} " + factor,
                      basis, nus, s_list, p, printed_sign)


# ---------------------------------------------------------------------------
# fitted bounds


def _quad(diag_vals, X):
    """<x, D x> for every column x of X, D diagonal."""
    return np.real(np.sum(np.conj(X) * (diag_vals[:, None] * X), axis=0))


def fit_tnt(modes, Ns, eta: float, k: int, samples: int = MIN_SAMPLES, seed: int = 0) -> BoundReport:
    """T* N_+^k T <= C_k (N_+^k + 1) on the full space with at most N excitations."""
    consts = {}
    for i, N in enumerate(Ns):
        basis = build_basis(modes, int(N), N)
        T = bogoliubov(basis, _pair_coeffs(basis, eta))
        X = random_states(basis.dim, samples, _rng(seed, 1, k, i))
        n = basis.total.astype(float)
        lhs = _quad(n**k, T @ X)
        rhs = _quad(n**k + 1, X)
        consts[N] = float(np.max(lhs / rhs))
    return BoundReport("number-growth-under-T", "T* N_+^k T <= C_k (N_+^k + 1)",
                       {"modes": [list(p.n) for p in modes], "eta": eta, "k": k, "n_max": "N"},
                       seed, samples, consts)


def _pair_coeffs(basis: FockBasis, eta: float) -> np.ndarray:
    return np.array([eta if negate(p) in basis._mode_index else 0.0 for p in basis.modes])


def fit_dp(modes, p: Momentum, Ns, eta: float, samples: int = MIN_SAMPLES, seed: int = 0) -> BoundReport:
    """||d_p xi|| <= (C/N) [|eta_p| ||(N_+ + 1)^{3/2} xi|| + ||b_p (N_+ + 1) xi||]."""
    consts = {}
    for i, N in enumerate(Ns):
        basis = build_basis(modes, int(N), N)
        T = bogoliubov(basis, _pair_coeffs(basis, eta))
        d = residual_d(basis, p, T, eta)
        bp = modified_annihilator(basis, p)
        X = random_states(basis.dim, samples, _rng(seed, 2, i))
        n1 = basis.total.astype(float) + 1
        lhs = column_norms(d @ X)
        rhs = (abs(eta) * column_norms(n1[:, None] ** 1.5 * X) + column_norms(bp @ (n1[:, None] * X))) / N
        consts[N] = float(np.max(lhs / rhs))
    return BoundReport("bogoliubov-residual", "||d_p xi|| <= (C/N)[|eta_p| ||(N_+ +1)^{3/2} xi|| + ||b_p (N_+ +1) xi||]",
                       {"modes": [list(q.n) for q in modes], "p": list(p.n), "eta": eta, "n_max": "N"},
                       seed, samples, consts)


def fit_sns(modes, low, Ns, eta: float, k: int, kappa: float, n_max: int, samples: int = MIN_SAMPLES,
            seed: int = 0, high=None) -> BoundReport:
    """e^{kappa A} N_+^k e^{-kappa A} <= C_k (N_+^k + 1)^k on a fixed truncation (margin states)."""
    consts = {}
    coverage = None
    for i, N in enumerate(Ns):
        basis = build_basis(modes, n_max, N)
        A, coverage = cubic_A(basis, np.full(basis.m, eta), low, high)
        U = exp_op(-kappa * A, unitary=True)
        X = random_states(basis.dim, samples, _rng(seed, 3, k, int(4 * kappa) + 8, i), basis.margin(3))
        n = basis.total.astype(float)
        lhs = _quad(n**k, U @ X)
        rhs = _quad((n**k + 1) ** k, X)
        consts[N] = float(np.max(lhs / rhs))
    return BoundReport("number-growth-under-cubic-phase", "e^{kappa A} N_+^k e^{-kappa A} <= C_k (N_+^k + 1)^k",
                       {"modes": [list(q.n) for q in modes], "low": [list(q.n) for q in low],
                        "high": None if high is None else [list(q.n) for q in high], "eta": eta, "k": k,
                        "kappa": kappa, "n_max": n_max,
                        "dropped_pair_fraction": coverage.dropped_fraction if coverage else 0.0},
                       seed, samples, consts)


def fit_commutator_bA(modes, low, Ns, eta: float, h, n_max: int, samples: int = MIN_SAMPLES,
                      seed: int = 0, high=None) -> BoundReport:
    """|<xi1, [b(h), A] xi2>| <= (C ||h|| / sqrt(N)) ||(N_+ +1)^{1/2} xi1|| ||(N_+ +1)^{1/2} xi2||."""
    h = np.asarray(h, dtype=complex)
    consts, sup = {}, {}
    coverage = None
    for i, N in enumerate(Ns):
        basis = build_basis(modes, n_max, N)
        A, coverage = cubic_A(basis, np.full(basis.m, eta), low, high)
        bh = smeared_annihilator(basis, h, modified=True)
        Cm = commutator(bh, A)
        X2 = random_states(basis.dim, samples, _rng(seed, 4, i), basis.margin(3))
        w = np.sqrt(basis.total.astype(float) + 1)[:, None]
        # for a given xi2 the ratio is maximized by xi1 ~ (N_+ + 1)^{-1} [b(h), A] xi2
        Y = Cm @ X2
        X1 = Y / w**2
        X1 = X1 / np.where(column_norms(X1) > 0, column_norms(X1), 1.0)
        lhs = np.abs(np.sum(np.conj(X1) * Y, axis=0))
        rhs = np.linalg.norm(h) / math.sqrt(N) * column_norms(w * X1) * column_norms(w * X2)
        consts[N] = float(np.max(lhs / rhs))
        cols = basis.margin(3)
        K = (Cm.dense() / w)[:, cols] / w[cols].T
        sup[N] = float(np.linalg.norm(K, 2) * math.sqrt(N) / np.linalg.norm(h))
    return BoundReport("commutator-b-with-cubic", "|<xi1,[b(h),A] xi2>| <= C ||h|| N^{-1/2} ||(N_+ +1)^{1/2} xi1|| ||(N_+ +1)^{1/2} xi2||",
                       {"modes": [list(q.n) for q in modes], "low": [list(q.n) for q in low],
                        "high": None if high is None else [list(q.n) for q in high], "eta": eta,
                        "h": _cplx(h), "n_max": n_max, "paired_xi1": "xi1 ~ (N_+ + 1)^{-1} [b(h),A] xi2",
                        "sup_over_margin": {str(k): v for k, v in sup.items()},
                        "dropped_pair_fraction": coverage.dropped_fraction if coverage else 0.0},
                       seed, samples, consts)


def verify_weyl_growth(basis: FockBasis, h, alpha: float = 1.0, j: int = 1, samples: int = MIN_SAMPLES,
                       seed: int = 0, stream: int = 0) -> float:
    """max over random xi of <xi, e^{-i phi(h)} (N_+ + alpha)^j e^{i phi(h)} xi> / <xi, (N_+ + alpha + ||h||^2)^j xi>."""
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    h = np.asarray(h, dtype=complex)
    gen = FockOperator(basis, 1j * field_op(basis, h, modified=True).mat)
    X = random_states(basis.dim, samples, _rng(seed, 5, j, stream))
    n = basis.total.astype(float)
    lhs = _quad((n + alpha) ** j, apply_exp(gen, X))
    rhs = _quad((n + alpha + np.vdot(h, h).real) ** j, X)
    return float(np.max(lhs / rhs))


def fit_weyl_growth(modes, Ns, h, alpha: float = 1.0, j: int = 1, samples: int = MIN_SAMPLES,
                    seed: int = 0) -> BoundReport:
    consts = {}
    for i, N in enumerate(Ns):
        basis = build_basis(modes, int(N), N)
        consts[N] = verify_weyl_growth(basis, h, alpha, j, samples, seed, i)
    return BoundReport("number-growth-under-weyl", "<xi, e^{-i phi(h)} (N_+ + alpha)^j e^{i phi(h)} xi> <= C <xi, (N_+ + alpha + ||h||^2)^j xi>",
                       {"modes": [list(q.n) for q in modes], "h": _cplx(h), "alpha": alpha, "j": j, "n_max": "N"},
                       seed, samples, consts)


def unitarity_report(basis: FockBasis, eta: float) -> IdentityReport:
    T = bogoliubov(basis, _pair_coeffs(basis, eta))
    return IdentityReport("bogoliubov-unitarity", "T* T = 1", {"n_max": basis.n_max, "N": basis.N, "eta": eta},
                          T.tag_error("unitary"), 1e-10)


def dgamma_bound_ratio(basis: FockBasis, A, samples: int = MIN_SAMPLES, seed: int = 0) -> float:
    """max ||dGamma(A) xi|| / (||A|| ||N_+ xi||) over random xi."""
    from .fock import dGamma

    op = dGamma(basis, A)
    X = random_states(basis.dim, samples, _rng(seed, 6))
    n = basis.total.astype(float)[:, None]
    return float(np.max(column_norms(op @ X) / (np.linalg.norm(A, 2) * column_norms(n * X))))


def field_bound_ratio(basis: FockBasis, h, samples: int = MIN_SAMPLES, seed: int = 0) -> float:
    """max ||b(h) xi|| / (||h|| ||N_+^{1/2} xi||) over random xi."""
    bh = smeared_annihilator(basis, h, modified=True)
    X = random_states(basis.dim, samples, _rng(seed, 7))
    n = np.sqrt(basis.total.astype(float))[:, None]
    return float(np.max(column_norms(bh @ X) / (np.linalg.norm(h) * column_norms(n * X))))


__all__ = [
    "IdentityReport",
    "BoundReport",
    "ccr_residuals",
    "ccr_report",
    "weyl_relation_residual",
    "weyl_relation_report",
    "verify_vacuum_cf",
    "verify_excited_cf",
    "s_ball",
    "fit_tnt",
    "fit_dp",
    "fit_sns",
    "fit_commutator_bA",
    "verify_weyl_growth",
    "fit_weyl_growth",
    "unitarity_report",
    "dgamma_bound_ratio",
    "field_bound_ratio",
    "covariance",
    "field_op",
    "modified_creator",
]
