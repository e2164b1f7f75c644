"""Truncated bosonic Fock space over a handful of lattice modes.

States are occupation vectors (n_1, ..., n_m) with total occupation at most
``n_max``.  Operators are sparse matrices on that basis; creation operators
are the adjoints of annihilators, so anything pushed past the cap is simply
dropped.  Identities that involve a product of ``d`` creation/annihilation
factors are exact on the margin subspace of states with at most
``n_max - d`` excitations.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from .lattice import ModeSet, Momentum, negate

UNITARY_TOL = 1e-10
HERMITIAN_TOL = 1e-12


class FockError(ValueError):
    pass


class ExpmError(ArithmeticError):
    pass


@dataclass(frozen=True)
class FockBasis:
    modes: tuple[Momentum, ...]
    n_max: int
    N: float
    states: np.ndarray = field(repr=False)

    def __len__(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[0]

    @property
    def m(self) -> int:
        return len(self.modes)

    @cached_property
    def _index(self) -> dict:
        return {tuple(s): i for i, s in enumerate(self.states.tolist())}

    @cached_property
    def _mode_index(self) -> dict:
        return {p: i for i, p in enumerate(self.modes)}

    def mode_index(self, p: Momentum) -> int:
        try:
            return self._mode_index[p]
        except KeyError:
            raise FockError(f"mode {p.n} is not part of this basis") from None

    def state_index(self, occ) -> int:
        return self._index[tuple(int(c) for c in occ)]

    @cached_property
    def total(self) -> np.ndarray:
        """N_+ eigenvalue of every basis state."""
        return self.states.sum(axis=1)

    def margin(self, depth: int) -> np.ndarray:
        """Indices of states with total occupation <= n_max - depth."""
        return np.flatnonzero(self.total <= self.n_max - depth)

    def vacuum(self) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.state_index([0] * self.m)] = 1.0
        return v

    def one_particle(self, p: Momentum) -> np.ndarray:
        occ = [0] * self.m
        occ[self.mode_index(p)] = 1
        v = np.zeros(self.dim, dtype=complex)
        v[self.state_index(occ)] = 1.0
        return v


def _compositions(m: int, n_max: int):
    for total in range(n_max + 1):
        # stars and bars, lexicographic within each particle number
        for bars in itertools.combinations(range(total + m - 1), m - 1):
            prev = -1
            occ = []
            for b in bars:
                occ.append(b - prev - 1)
                prev = b
            occ.append(total + m - 1 - prev - 1)
            yield occ[::-1]


def build_basis(modes, n_max: int, N: float) -> FockBasis:
    """States with at most n_max excitations over ``modes``; requires n_max <= N."""
    modes = tuple(modes.modes if isinstance(modes, ModeSet) else modes)
    if n_max < 0:
        raise FockError("n_max must be non-negative")
    if n_max > N:
        raise FockError(
            f"n_max={n_max} exceeds N={N}: the excitation space holds at most N particles, "
            "so sqrt(N - N_+) must stay real")
    if len(set(modes)) != len(modes):
        raise FockError("duplicate modes")
    states = np.array(sorted(_compositions(len(modes), n_max), key=lambda o: (sum(o), [-c for c in o])),
                      dtype=int).reshape(-1, len(modes))
    expected = math.comb(n_max + len(modes), len(modes))
    assert states.shape[0] == expected, (states.shape, expected)
    return FockBasis(modes=modes, n_max=int(n_max), N=float(N), states=states)


@dataclass(frozen=True)
class FockOperator:
    """Sparse matrix on a FockBasis with optional structural tags."""

    basis: FockBasis = field(repr=False)
    mat: sp.csr_matrix = field(repr=False)
    tags: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "mat", sp.csr_matrix(self.mat, dtype=complex))
        for tag in self.tags:
            err = self.tag_error(tag)
            tol = UNITARY_TOL if tag == "unitary" else HERMITIAN_TOL
            if err > tol:
                raise FockError(f"operator declared {tag} but violates it by {err:.3e}")

    def tag_error(self, tag: str) -> float:
        M = self.mat
        if tag == "hermitian":
            return _sparse_max(M - M.getH())
        if tag == "antihermitian":
            return _sparse_max(M + M.getH())
        if tag == "unitary":
            return _sparse_max(M.getH() @ M - sp.identity(M.shape[0], format="csr"))
        raise ValueError(f"unknown tag {tag!r}")

    @property
    def H(self) -> "FockOperator":
        flip = {"antihermitian": "antihermitian", "hermitian": "hermitian", "unitary": "unitary"}
        return FockOperator(self.basis, self.mat.getH().tocsr(), frozenset(flip[t] for t in self.tags))

    def dense(self) -> np.ndarray:
        return self.mat.toarray()

    def __matmul__(self, other):
        if isinstance(other, FockOperator):
            return FockOperator(self.basis, self.mat @ other.mat)
        return self.mat @ other

    def __add__(self, other: "FockOperator") -> "FockOperator":
        return FockOperator(self.basis, self.mat + other.mat)

    def __sub__(self, other: "FockOperator") -> "FockOperator":
        return FockOperator(self.basis, self.mat - other.mat)

    def __mul__(self, c) -> "FockOperator":
        return FockOperator(self.basis, self.mat * c)

    __rmul__ = __mul__

    def __neg__(self) -> "FockOperator":
        return FockOperator(self.basis, -self.mat, self.tags)

    def norm(self) -> float:
        return _sparse_max(self.mat)


def _sparse_max(M) -> float:
    M = sp.csr_matrix(M)
    return float(np.abs(M.data).max()) if M.nnz else 0.0


def commutator(X: FockOperator, Y: FockOperator) -> FockOperator:
    return X @ Y - Y @ X


# ---------------------------------------------------------------------------
# elementary operators


def annihilator(basis: FockBasis, p: Momentum) -> FockOperator:
    j = basis.mode_index(p)
    rows, cols, vals = [], [], []
    for i, occ in enumerate(basis.states):
        n = occ[j]
        if n:
            tgt = occ.copy()
            tgt[j] -= 1
            rows.append(basis.state_index(tgt))
            cols.append(i)
            vals.append(math.sqrt(n))
    M = sp.csr_matrix((vals, (rows, cols)), shape=(basis.dim, basis.dim), dtype=complex)
    return FockOperator(basis, M)


def creator(basis: FockBasis, p: Momentum) -> FockOperator:
    return annihilator(basis, p).H


def number_op(basis: FockBasis) -> FockOperator:
    return FockOperator(basis, sp.diags(basis.total.astype(complex)), frozenset({"hermitian"}))


def diag_function(basis: FockBasis, fn) -> FockOperator:
    """fn(N_+) as a diagonal operator."""
    return FockOperator(basis, sp.diags(np.asarray(fn(basis.total.astype(float)), dtype=complex)))


def depletion_factor(basis: FockBasis) -> FockOperator:
    """sqrt((N - N_+)/N)."""
    return diag_function(basis, lambda n: np.sqrt((basis.N - n) / basis.N))


def modified_annihilator(basis: FockBasis, p: Momentum) -> FockOperator:
    """b_p = sqrt((N - N_+)/N) a_p."""
    return depletion_factor(basis) @ annihilator(basis, p)


def modified_creator(basis: FockBasis, p: Momentum) -> FockOperator:
    return modified_annihilator(basis, p).H


def dGamma(basis: FockBasis, A) -> FockOperator:
    """Second quantization sum_pq A_pq a*_p a_q of an m x m one-particle matrix."""
    A = np.asarray(A, dtype=complex)
    if A.shape != (basis.m, basis.m):
        raise FockError(f"one-particle matrix has shape {A.shape}, basis has {basis.m} modes")
    a = [annihilator(basis, p).mat for p in basis.modes]
    M = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    for i, j in zip(*np.nonzero(A)):
        M = M + A[i, j] * (a[i].getH() @ a[j])
    tags = frozenset({"hermitian"}) if np.allclose(A, A.conj().T) else frozenset()
    return FockOperator(basis, M, tags)


def _weights(basis: FockBasis, h) -> np.ndarray:
    h = np.asarray(h, dtype=complex).reshape(-1)
    if h.shape != (basis.m,):
        raise FockError(f"h has {h.size} entries, basis has {basis.m} modes")
    return h


def smeared_annihilator(basis: FockBasis, h, modified: bool = False) -> FockOperator:
    """a(h) = sum conj(h_p) a_p, or b(h) with ``modified``."""
    h = _weights(basis, h)
    op = modified_annihilator if modified else annihilator
    M = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    for p, hp in zip(basis.modes, h):
        if hp != 0:
            M = M + np.conj(hp) * op(basis, p).mat
    return FockOperator(basis, M)


def field_op(basis: FockBasis, h, modified: bool = False) -> FockOperator:
    """phi(h) = b(h) + b*(h) (modified) or a(h) + a*(h)."""
    ann = smeared_annihilator(basis, h, modified)
    return FockOperator(basis, ann.mat + ann.mat.getH(), frozenset({"hermitian"}))


# ---------------------------------------------------------------------------
# exponentials


def expm_blocks(G) -> sp.csr_matrix:
    """exp(G) by exponentiating each connected block of G separately.

    Conserved quantities (momentum, n_p - n_{-p}) make the generators block
    diagonal; each block goes through scipy's scaling-and-squaring Pade expm.
    """
    G = sp.csr_matrix(G, dtype=complex)
    n = G.shape[0]
    pattern = abs(G) + abs(G).T
    ncomp, labels = connected_components(pattern, directed=False)
    rows, cols, vals = [], [], []
    order = np.argsort(labels, kind="stable")
    bounds = np.searchsorted(labels[order], np.arange(ncomp + 1))
    for c in range(ncomp):
        idx = order[bounds[c]:bounds[c + 1]]
        if idx.size == 1:
            E = np.exp(G[idx[0], idx[0]]).reshape(1, 1)
        else:
            E = sla.expm(G[idx][:, idx].toarray())
        if not np.all(np.isfinite(E)):
            norm1 = float(np.abs(G[idx][:, idx]).sum(axis=0).max())
            squarings = max(0, math.ceil(math.log2(norm1 / 5.37))) if norm1 > 0 else 0
            raise ExpmError(f"matrix exponential overflowed on a block of size {idx.size} "
                            f"(1-norm {norm1:.3e}, ~{squarings} squarings)")
        r, cc = np.meshgrid(idx, idx, indexing="ij")
        rows.append(r.ravel())
        cols.append(cc.ravel())
        vals.append(E.ravel())
    M = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    M.eliminate_zeros()
    return M


def exp_op(X: FockOperator, unitary: bool = False) -> FockOperator:
    E = expm_blocks(X.mat)
    if unitary:
        err = _sparse_max(E.getH() @ E - sp.identity(E.shape[0], format="csr"))
        if err > UNITARY_TOL:
            norm1 = float(abs(X.mat).sum(axis=0).max())
            raise ExpmError(f"exponential of an antihermitian generator is not unitary "
                            f"(error {err:.3e}, generator 1-norm {norm1:.3e})")
    return FockOperator(X.basis, E, frozenset({"unitary"}) if unitary else frozenset())


def apply_exp(X: FockOperator, vectors) -> np.ndarray:
    """exp(X) applied to the columns of ``vectors`` without forming exp(X).

    Used when the generator does not split into small blocks (fields change
    N_+ by one, so e^{i phi(h)} couples the whole truncated space).
    """
    return spla.expm_multiply(X.mat.tocsc(), np.asarray(vectors, dtype=complex))


def weyl(basis: FockBasis, h, s: float = 1.0, modified: bool = False) -> FockOperator:
    """exp(i s phi(h))."""
    phi = field_op(basis, h, modified)
    return exp_op(FockOperator(basis, 1j * s * phi.mat), unitary=True)


def _check_pair_symmetric(basis: FockBasis, coeffs) -> np.ndarray:
    c = np.asarray(coeffs, dtype=float).reshape(-1)
    if c.shape != (basis.m,):
        raise FockError(f"need one coefficient per mode ({basis.m}), got {c.size}")
    for i, p in enumerate(basis.modes):
        q = negate(p)
        if q not in basis._mode_index:
            if c[i] != 0:
                raise FockError(f"mode {p.n} has a coefficient but -p is not in the basis")
            continue
        if not np.isclose(c[i], c[basis.mode_index(q)], rtol=0, atol=1e-15):
            raise FockError(f"coefficients are not symmetric under p -> -p at {p.n}")
    return c


def bogoliubov_generator(basis: FockBasis, coeffs, modified: bool = True) -> FockOperator:
    """(1/2) sum_p c_p (b*_p b*_-p - b_-p b_p); ``modified=False`` uses a-operators."""
    c = _check_pair_symmetric(basis, coeffs)
    ann = modified_annihilator if modified else annihilator
    M = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    for i, p in enumerate(basis.modes):
        if c[i] == 0:
            continue
        bp = ann(basis, p).mat
        bm = ann(basis, negate(p)).mat
        pair = bm @ bp
        M = M + 0.5 * c[i] * (pair.getH() - pair)
    return FockOperator(basis, M, frozenset({"antihermitian"}))


def bogoliubov(basis: FockBasis, coeffs, modified: bool = True) -> FockOperator:
    """T = exp[(1/2) sum_p c_p (b*_p b*_-p - b_-p b_p)]."""
    return exp_op(bogoliubov_generator(basis, coeffs, modified), unitary=True)


def residual_d(basis: FockBasis, p: Momentum, T: FockOperator, eta_p: float) -> FockOperator:
    """d_p = T* b_p T - cosh(eta_p) b_p - sinh(eta_p) b*_-p."""
    bp = modified_annihilator(basis, p)
    bmp_star = modified_creator(basis, negate(p))
    return T.H @ bp @ T - math.cosh(eta_p) * bp - math.sinh(eta_p) * bmp_star


@dataclass(frozen=True)
class CubicCoverage:
    used_pairs: int
    dropped_pairs: int

    @property
    def dropped_fraction(self) -> float:
        total = self.used_pairs + self.dropped_pairs
        return self.dropped_pairs / total if total else 0.0


def cubic_A(basis: FockBasis, eta, low, high=None) -> tuple[FockOperator, CubicCoverage]:
    """Cubic generator A over high momenta r and low momenta v.

    A = N^{-1/2} sum_{r, v} eta_r [sinh(eta_v) b*_{r+v} b*_{-r} b*_{-v}
                                   + cosh(eta_v) b*_{r+v} b*_{-r} b_v - h.c.]

    ``low``/``high`` are lists of Momentum (``high`` defaults to the rest of
    the basis).  Pairs whose r + v, -r or -v leave the basis are dropped and
    counted in the returned coverage.
    """
    eta = np.asarray(eta, dtype=float).reshape(-1)
    if eta.shape != (basis.m,):
        raise FockError(f"need one eta per mode ({basis.m})")
    low = list(low)
    high = [p for p in basis.modes if p not in set(low)] if high is None else list(high)
    zero = FockOperator(basis, sp.csr_matrix((basis.dim, basis.dim), dtype=complex),
                        frozenset({"antihermitian"}))
    if not low or not high:
        return zero, CubicCoverage(0, 0)
    ann = {p: modified_annihilator(basis, p).mat for p in basis.modes}
    cre = {p: m.getH().tocsr() for p, m in ann.items()}
    M = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    used = dropped = 0
    for r in high:
        for v in low:
            nr = tuple(a + b for a, b in zip(r.n, v.n))
            if nr == (0, 0, 0):
                continue
            rv = Momentum(nr)
            if rv not in ann or negate(r) not in ann or negate(v) not in ann:
                dropped += 1
                continue
            used += 1
            er = eta[basis.mode_index(r)]
            ev = eta[basis.mode_index(v)]
            if er == 0:
                continue
            head = cre[rv] @ cre[negate(r)]
            term = math.sinh(ev) * (head @ cre[negate(v)]) + math.cosh(ev) * (head @ ann[v])
            M = M + er * (term - term.getH())
    A = FockOperator(basis, M / math.sqrt(basis.N), frozenset({"antihermitian"}))
    return A, CubicCoverage(used, dropped)


def column_norms(X) -> np.ndarray:
    """Euclidean norm of each column of a dense (dim, k) array."""
    return np.sqrt(np.sum(np.abs(X) ** 2, axis=0))


def random_states(dim: int, count: int, rng: np.random.Generator, support=None) -> np.ndarray:
    """Normalized complex Gaussian vectors as columns, optionally restricted to ``support``."""
    Z = np.zeros((dim, count), dtype=complex)
    idx = np.arange(dim) if support is None else np.asarray(support)
    Z[idx] = rng.standard_normal((idx.size, count)) + 1j * rng.standard_normal((idx.size, count))
    return Z / column_norms(Z)
