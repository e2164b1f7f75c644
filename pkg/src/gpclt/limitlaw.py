"""Limiting Gaussian law: covariance, characteristic functions, densities, distances.

Fourier convention: chi(s) = E[exp(i s X)], so the density is
rho(lam) = (1/2pi) int chi(s) exp(-i s lam) ds and a test function g is
recovered from ghat(s) = (1/2pi) int g(lam) exp(-i s lam) dlam.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .observables import NuVector


class SingularCovarianceError(np.linalg.LinAlgError):
    pass


class InsufficientDecayError(ValueError):
    """The characteristic function does not decay inside the allowed s-range."""


@dataclass(frozen=True)
class CovMatrix:
    """k x k covariance with entry (i, j) = <nu_min(i,j), nu_max(i,j)>."""

    entries: np.ndarray
    convention: str = "upper-inner-product"

    @property
    def k(self) -> int:
        return self.entries.shape[0]

    @property
    def is_real(self) -> bool:
        return bool(np.allclose(self.entries.imag, 0.0, atol=1e-14 * max(1.0, np.abs(self.entries).max())))

    @property
    def det(self) -> complex:
        return complex(np.linalg.det(self.entries))

    @property
    def condition_number(self) -> float:
        return float(np.linalg.cond(self.entries))

    @property
    def singular(self) -> bool:
        scale = max(float(np.abs(self.entries).max()), 1e-300)
        return abs(self.det) <= 1e-12 * scale**self.k or self.condition_number > 1e12

    @property
    def re_min_eigenvalue(self) -> float:
        re = self.entries.real
        return float(np.linalg.eigvalsh(0.5 * (re + re.T)).min())

    def to_dict(self) -> dict:
        return {
            "re": self.entries.real.tolist(),
            "im": self.entries.imag.tolist(),
            "det_re": self.det.real,
            "det_im": self.det.imag,
            "condition_number": self.condition_number,
            "convention": self.convention,
        }


def covariance(nus: Sequence[NuVector]) -> CovMatrix:
    if not nus:
        raise ValueError("need at least one vector")
    modes = nus[0].modes
    for v in nus[1:]:
        if v.modes is not modes and v.modes.modes != modes.modes:
            raise ValueError("vectors live on different mode sets")
    k = len(nus)
    S = np.empty((k, k), dtype=complex)
    for i, j in itertools.product(range(k), repeat=2):
        a, b = (i, j) if i <= j else (j, i)
        S[i, j] = np.vdot(nus[a].values, nus[b].values)  # antilinear in the first slot
    return CovMatrix(S)


def _as_matrix(cov) -> np.ndarray:
    return cov.entries if isinstance(cov, CovMatrix) else np.atleast_2d(np.asarray(cov, dtype=complex))


def _batch(s, k: int):
    """Reshape s to (M, k); the flag says whether a single point was given."""
    s = np.asarray(s, dtype=float)
    if s.ndim == 0:
        return s.reshape(1, 1), True
    if s.ndim == 1:
        if k == 1:
            return s.reshape(-1, 1), s.size == 1
        if s.size != k:
            raise ValueError(f"s has {s.size} components, expected {k}")
        return s.reshape(1, k), True
    return s, False


def limit_char_fn(cov, s):
    """exp(-1/2 sum_lj s_l s_j Sigma_lj); ``s`` has shape (k,) or (M, k)."""
    S = _as_matrix(cov)
    pts, single = _batch(s, S.shape[0])
    out = np.exp(-0.5 * np.einsum("mi,ij,mj->m", pts, S, pts))
    return complex(out[0]) if single else out


def excited_char_fn(cov, nus_at_p, s):
    """Characteristic function of the one-excitation state a*_p Omega.

    exp(-1/2 s.Sigma.s) * (1 - |sum_j s_j nu_j(p)|^2), with ``nus_at_p`` the
    numbers nu_j(p).  The minus sign follows from
    <a*_p Omega, exp(i a*(nu)) exp(i a(nu)) a*_p Omega> = 1 - |nu(p)|^2.
    """
    S = _as_matrix(cov)
    c = np.asarray(nus_at_p, dtype=complex).reshape(-1)
    pts, single = _batch(s, S.shape[0])
    out = np.exp(-0.5 * np.einsum("mi,ij,mj->m", pts, S, pts)) * (1.0 - np.abs(pts @ c) ** 2)
    return complex(out[0]) if single else out


def _require_invertible(S: np.ndarray):
    cov = CovMatrix(S)
    if cov.singular:
        raise SingularCovarianceError(
            "covariance is singular; the limit law needs the matrix Sigma to be invertible "
            f"(det={cov.det:.3e}, cond={cov.condition_number:.3e})")
    if not cov.is_real:
        raise ValueError("density inversion is only offered for real covariance; "
                         "use the characteristic function for complex Sigma")
    return S.real


def gaussian_density(cov, points) -> np.ndarray:
    """Centred Gaussian density at ``points`` (shape (M,) for k = 1 or (M, k)); k <= 3."""
    S = _require_invertible(_as_matrix(cov))
    k = S.shape[0]
    if k > 3:
        raise ValueError("gridded densities are limited to k <= 3")
    x = np.asarray(points, dtype=float).reshape(-1, k)
    inv = np.linalg.inv(S)
    q = np.einsum("mi,ij,mj->m", x, inv, x)
    vals = np.exp(-0.5 * q) / np.sqrt((2 * np.pi) ** k * np.linalg.det(S))
    return vals if k > 1 else vals.reshape(np.shape(points))


def tensor_grid(*axes) -> np.ndarray:
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass(frozen=True)
class Density1D:
    grid: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    s_max: float = float("nan")
    n_s: int = 0
    imag_residual: float = 0.0

    @property
    def normalization(self) -> float:
        return float(_spline(self).integrate(self.grid[0], self.grid[-1]))

    def cdf(self, x=None) -> np.ndarray:
        x = self.grid if x is None else np.asarray(x, dtype=float)
        anti = _spline(self).antiderivative()
        return anti(x) - anti(self.grid[0])

    def to_rows(self):
        return zip(self.grid, self.values.real, np.zeros_like(self.grid) if np.isrealobj(self.values)
                   else self.values.imag)


def _spline(d: Density1D) -> CubicSpline:
    return CubicSpline(d.grid, np.real(d.values))


def choose_s_max(char_fn: Callable, tail_tol: float = 1e-10, start: float = 1.0,
                 limit: float = 1e4) -> float:
    s = start
    while s <= limit:
        probe = np.array([-s, s, -1.25 * s, 1.25 * s])
        if np.max(np.abs(char_fn(probe))) < tail_tol:
            return s
        s *= 1.25
    raise InsufficientDecayError(
        f"characteristic function still above {tail_tol:g} at |s| = {limit:g}; refusing to invert")


def invert_char_fn(char_fn: Callable, grid, s_max: float | None = None, n_s: int | None = None,
                   tail_tol: float = 1e-10) -> Density1D:
    """rho(lam) = (1/2pi) int chi(s) exp(-i s lam) ds by the trapezoid rule.

    ``char_fn`` maps an array of s to an array of chi(s).  The s-range is
    grown until |chi| < tail_tol at its ends; the step is kept well below
    the aliasing limit pi / max|lam|.
    """
    grid = np.asarray(grid, dtype=float)
    if s_max is None:
        s_max = choose_s_max(char_fn, tail_tol)
    elif np.max(np.abs(char_fn(np.array([-s_max, s_max])))) >= tail_tol:
        raise InsufficientDecayError(f"|chi(+-{s_max})| >= {tail_tol:g}: s-range too short")
    lam_max = float(np.max(np.abs(grid))) + 1.0
    if n_s is None:
        ds = min(np.pi / (4 * lam_max), s_max / 1000)
        n_s = int(np.ceil(2 * s_max / ds)) + 1
    s = np.linspace(-s_max, s_max, n_s)
    ds = s[1] - s[0]
    chi = np.asarray(char_fn(s), dtype=complex)
    w = np.full(n_s, ds)
    w[0] = w[-1] = ds / 2
    vals = np.empty(grid.shape, dtype=complex)
    for a in range(0, grid.size, 512):
        g = grid[a:a + 512]
        vals[a:a + 512] = np.exp(-1j * np.outer(g, s)) @ (w * chi)
    vals /= 2 * np.pi
    imag = float(np.max(np.abs(vals.imag))) if vals.size else 0.0
    return Density1D(grid=grid, values=vals.real, s_max=float(s_max), n_s=n_s, imag_residual=imag)


def excited_density_1d(lam, variance: float, nu_p_sq: float) -> np.ndarray:
    """rho(lam) [1 + |nu(p)|^2 (lam^2 - var) / var^2] for k = 1."""
    lam = np.asarray(lam, dtype=float)
    rho = np.exp(-0.5 * lam**2 / variance) / np.sqrt(2 * np.pi * variance)
    return rho * (1.0 + nu_p_sq * (lam**2 - variance) / variance**2)


def density_from_values(grid, values) -> Density1D:
    return Density1D(grid=np.asarray(grid, dtype=float), values=np.asarray(values))


def interval_probability(density: Density1D, alpha: float, beta: float) -> float:
    g = density.grid
    if alpha < g[0] or beta > g[-1] or alpha > beta:
        raise ValueError(f"[{alpha}, {beta}] is not inside the density grid [{g[0]}, {g[-1]}]")
    return float(_spline(density).integrate(alpha, beta))


def kolmogorov_distance(d1: Density1D, d2: Density1D, refine: int = 8) -> float:
    """sup |CDF1 - CDF2|, sampled on a refinement of the common grid."""
    if d1.grid.shape != d2.grid.shape or not np.allclose(d1.grid, d2.grid):
        raise ValueError("densities must share a grid")
    g = d1.grid
    fine = np.linspace(g[0], g[-1], refine * (g.size - 1) + 1)
    return float(np.max(np.abs(d1.cdf(fine) - d2.cdf(fine))))


@dataclass(frozen=True)
class ExpectationResult:
    value: complex
    weights: tuple  # int |ghat_j| (1 + s^4) ds per factor
    s_max: float


def expectation_of_products(ghats: Sequence[Callable], cov, s_grid=None, s_max: float | None = None,
                            n: int = 401, tail_tol: float = 1e-12) -> ExpectationResult:
    """int ghat_1(s_1) ... ghat_k(s_k) chi(s) ds on a tensor grid (trapezoid rule)."""
    S = _as_matrix(cov)
    k = S.shape[0]
    if len(ghats) != k:
        raise ValueError(f"{len(ghats)} test functions for a {k}x{k} covariance")
    if k > 3:
        raise ValueError("tensor-grid quadrature is limited to k <= 3")
    if s_grid is None:
        if s_max is None:
            re = 0.5 * (S.real + S.real.T)
            lam_min = float(np.linalg.eigvalsh(re).min())
            if lam_min <= 0:
                raise SingularCovarianceError("Re Sigma is not positive definite; pass s_max explicitly")
            s_max = float(np.sqrt(2 * np.log(1 / tail_tol) / lam_min))
        s_grid = np.linspace(-s_max, s_max, n)
    s_grid = np.asarray(s_grid, dtype=float)
    w = np.gradient(s_grid)  # trapezoid weights for (possibly) non-uniform grids
    w[0] = (s_grid[1] - s_grid[0]) / 2
    w[-1] = (s_grid[-1] - s_grid[-2]) / 2
    gvals = [np.asarray(g(s_grid), dtype=complex) for g in ghats]
    weights = []
    for gv in gvals:
        wt = float(np.sum(w * np.abs(gv) * (1 + s_grid**4)))
        if not np.isfinite(wt):
            raise ValueError("test function is not integrable against (1 + |s|^4)")
        weights.append(wt)
    pts = tensor_grid(*([s_grid] * k))
    chi = np.asarray(limit_char_fn(S, pts)).reshape((s_grid.size,) * k)
    integrand = chi
    for axis, gv in enumerate(gvals):
        shape = [1] * k
        shape[axis] = -1
        integrand = integrand * (gv * w).reshape(shape)
    return ExpectationResult(complex(integrand.sum()), tuple(weights), float(s_grid[-1]))
