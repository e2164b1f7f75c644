"""Radial zero-energy scattering and the Neumann problem on the ball |x| <= N*ell.

Everything is reduced to the radial function u(r) = r f(r), which solves

    u'' = (V(r)/2 - lam) u,   u(0) = 0.

Inside the support of V the equation is integrated with classical RK4 on a
uniform grid; because the equation is linear, each step is a 2x2 transfer
matrix and the whole inner propagation is a batched matrix product.  Outside
the support V vanishes and u is propagated in closed form.
"""
from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

log = logging.getLogger(__name__)

DEFAULT_ELL = 0.49
DEFAULT_INNER = 2**14
DEFAULT_OUTER = 2**14
CACHE_SCHEMA = 1
CACHE_ENV = "GPCLT_CACHE_DIR"
MAX_PHASE_STEP = 0.25  # largest k * dr accepted by the outer quadrature


class ScatteringError(RuntimeError):
    """Raised when a radial solve fails or its result cannot be trusted."""


@dataclass(frozen=True)
class RadialPotential:
    """Non-negative, compactly supported radial potential.

    ``kind`` is ``"soft_sphere"`` (height ``v0`` on r < ``R``) or
    ``"tabulated"`` (linear interpolation of ``values`` on ``grid``, zero past
    the last grid point).
    """

    kind: str
    v0: float = 0.0
    R: float = 1.0
    grid: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if self.kind == "soft_sphere":
            if self.v0 < 0:
                raise ValueError("soft sphere height must be non-negative")
            if self.R <= 0:
                raise ValueError("support radius must be positive")
        elif self.kind == "tabulated":
            g = np.asarray(self.grid, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if g.ndim != 1 or g.shape != v.shape or g.size < 2:
                raise ValueError("tabulated potential needs matching 1d grid and values")
            if np.any(np.diff(g) <= 0) or g[0] < 0:
                raise ValueError("tabulated grid must be increasing and start at r >= 0")
            if np.any(v < 0):
                raise ValueError("potential must be non-negative (repulsive)")
        else:
            raise ValueError(f"unknown potential kind {self.kind!r}")

    @classmethod
    def soft_sphere(cls, v0: float, R: float) -> "RadialPotential":
        return cls("soft_sphere", v0=float(v0), R=float(R))

    @classmethod
    def zero(cls, R: float = 1.0) -> "RadialPotential":
        return cls("soft_sphere", v0=0.0, R=float(R))

    @classmethod
    def tabulated(cls, grid, values) -> "RadialPotential":
        return cls("tabulated", grid=tuple(map(float, grid)), values=tuple(map(float, values)))

    @property
    def support_radius(self) -> float:
        if self.kind == "soft_sphere":
            return self.R
        return float(self.grid[-1])

    @property
    def max_value(self) -> float:
        if self.kind == "soft_sphere":
            return self.v0
        return float(max(self.values))

    @property
    def is_zero(self) -> bool:
        return self.max_value == 0.0

    def inside(self, r) -> np.ndarray:
        """V on the closed support [0, R], using the inner limit at r = R."""
        r = np.asarray(r, dtype=float)
        if self.kind == "soft_sphere":
            return np.full_like(r, self.v0)
        g = np.asarray(self.grid)
        return np.interp(r, g, np.asarray(self.values), left=self.values[0])

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return np.where(r < self.support_radius, self.inside(r), 0.0)

    def to_dict(self) -> dict:
        if self.kind == "soft_sphere":
            return {"kind": "soft_sphere", "v0": self.v0, "R": self.R}
        return {"kind": "tabulated", "grid": list(self.grid), "values": list(self.values)}

    @classmethod
    def from_dict(cls, d: dict) -> "RadialPotential":
        kind = d.get("kind")
        if kind == "soft_sphere":
            return cls.soft_sphere(d["v0"], d["R"])
        if kind == "tabulated":
            return cls.tabulated(d["grid"], d["values"])
        raise ValueError(f"unknown potential kind {kind!r}")

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# ---------------------------------------------------------------------------
# inner propagation


def _rk4_step_matrices(q0, qh, q1, h):
    """RK4 propagators for y' = [[0, 1], [q, 0]] y, one 2x2 matrix per step.

    q0, qh, q1 are q at the left end, midpoint and right end of each step.
    """
    n = q0.shape[0]
    eye = np.broadcast_to(np.eye(2), (n, 2, 2))

    def gen(q):
        a = np.zeros((n, 2, 2))
        a[:, 0, 1] = 1.0
        a[:, 1, 0] = q
        return a

    a1, a2, a4 = gen(q0), gen(qh), gen(q1)
    b1 = eye + 0.5 * h * a1
    b2 = eye + 0.5 * h * a2 @ b1
    b3 = eye + h * a2 @ b2
    return eye + (h / 6.0) * (a1 + 2.0 * a2 @ b1 + 2.0 * a2 @ b2 + a4 @ b3)


def _chain_product(mats):
    """M[n-1] @ ... @ M[0] by pairwise reduction."""
    m = mats
    while m.shape[0] > 1:
        if m.shape[0] % 2:
            m = np.concatenate([m, np.eye(2)[None]], axis=0)
        m = m[1::2] @ m[0::2]
    return m[0]


@dataclass
class _Inner:
    r: np.ndarray
    steps: np.ndarray

    @property
    def h(self) -> float:
        return float(self.r[1] - self.r[0])


def _inner_steps(V: RadialPotential, lam: float, n: int) -> _Inner:
    R = V.support_radius
    r = np.linspace(0.0, R, n + 1)
    h = R / n
    q = lambda x: 0.5 * V.inside(x) - lam
    steps = _rk4_step_matrices(q(r[:-1]), q(r[:-1] + 0.5 * h), q(r[1:]), h)
    return _Inner(r=r, steps=steps)


def _boundary_data(V: RadialPotential, lam: float, n: int) -> tuple[float, float]:
    """(u, u') at r = R for u(0) = 0, u'(0) = 1."""
    P = _chain_product(_inner_steps(V, lam, n).steps)
    return float(P[0, 1]), float(P[1, 1])


def _inner_profile(V: RadialPotential, lam: float, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    inner = _inner_steps(V, lam, n)
    u = np.empty(n + 1)
    du = np.empty(n + 1)
    y0, y1 = 0.0, 1.0
    u[0], du[0] = y0, y1
    S = inner.steps
    for i in range(n):
        y0, y1 = S[i, 0, 0] * y0 + S[i, 0, 1] * y1, S[i, 1, 0] * y0 + S[i, 1, 1] * y1
        u[i + 1], du[i + 1] = y0, y1
    return inner.r, u, du


def _outer(uR: float, duR: float, lam: float, x):
    """Free propagation of (u, u') a distance x = r - R past the support."""
    x = np.asarray(x, dtype=float)
    k = np.sqrt(lam)
    sk = x * np.sinc(k * x / np.pi)  # sin(kx)/k, exact limit x at k = 0
    c = np.cos(k * x)
    return uR * c + duR * sk, duR * c - uR * lam * sk


def simpson(y: np.ndarray, dx: float, axis: int = -1) -> np.ndarray:
    """Composite Simpson rule on an even number of uniform intervals."""
    y = np.moveaxis(np.asarray(y), axis, -1)
    if (y.shape[-1] - 1) % 2:
        raise ValueError("Simpson's rule needs an even number of intervals")
    return dx / 3.0 * (y[..., 0] + y[..., -1] + 4.0 * y[..., 1:-1:2].sum(-1) + 2.0 * y[..., 2:-1:2].sum(-1))


# ---------------------------------------------------------------------------
# zero-energy problem


@dataclass(frozen=True)
class ScatteringLength:
    a0: float
    spread: float
    r_outer: np.ndarray = field(repr=False)
    a0_outer: np.ndarray = field(repr=False)


def scattering_length(V: RadialPotential, r_max: float | None = None, grid: int = DEFAULT_INNER,
                      tol: float = 1e-10) -> float:
    return scattering_length_report(V, r_max, grid, tol).a0


def scattering_length_report(V: RadialPotential, r_max: float | None = None, grid: int = DEFAULT_INNER,
                             tol: float = 1e-10) -> ScatteringLength:
    """Scattering length from the zero-energy solution, a0 = r - u/u' past the support.

    The outward integration is continued with the same RK4 step size out to
    ``r_max``; the extracted a0 must be constant there to within ``tol``
    (relative to max(1, |a0|)), otherwise the grid is reported as too coarse.
    """
    R = V.support_radius
    r_max = 2.0 * R if r_max is None else float(r_max)
    if r_max < 2.0 * R:
        raise ValueError(f"r_max={r_max} must be at least twice the support radius {R}")
    if V.is_zero:
        r_out = np.linspace(R, r_max, 9)
        return ScatteringLength(0.0, 0.0, r_out, np.zeros_like(r_out))
    uR, duR = _boundary_data(V, 0.0, grid)
    h = R / grid
    n_out = max(2, int(np.ceil((r_max - R) / h)))
    h_out = (r_max - R) / n_out
    free = _rk4_step_matrices(np.zeros(n_out), np.zeros(n_out), np.zeros(n_out), h_out)
    y = np.array([uR, duR])
    r_out = R + h_out * np.arange(n_out + 1)
    # only a handful of checkpoints are needed; propagate with the exact free matrices
    idx = np.unique(np.linspace(0, n_out, 9).astype(int))
    a_vals = []
    cur = 0
    for i in idx:
        if i > cur:
            y = _chain_product(free[cur:i]) @ y
            cur = i
        a_vals.append(r_out[i] - y[0] / y[1])
    a_vals = np.array(a_vals)
    a0 = float(a_vals[0])
    spread = float(np.ptp(a_vals))
    if spread > tol * max(1.0, abs(a0)):
        raise ScatteringError(f"grid too coarse: a0 varies by {spread:.3e} across the outer region")
    return ScatteringLength(a0, spread, r_out[idx], a_vals)


# ---------------------------------------------------------------------------
# Neumann problem


@dataclass
class ScatteringSolution:
    """Ground state of [-Laplace + V/2] f = lam f on |x| <= D with f'(D) = 0, f(D) = 1."""

    potential: RadialPotential
    N: float
    ell: float
    lam: float
    a0: float
    u_R: float
    du_R: float
    r_inner: np.ndarray = field(repr=False)
    u_inner: np.ndarray = field(repr=False)
    n_outer: int = DEFAULT_OUTER

    @property
    def D(self) -> float:
        return self.N * self.ell

    @property
    def R(self) -> float:
        return self.potential.support_radius

    @cached_property
    def _scale(self) -> float:
        uD, _ = _outer(self.u_R, self.du_R, self.lam, self.D - self.R)
        return float(self.D / uD)

    @cached_property
    def f_inner(self) -> np.ndarray:
        r = self.r_inner
        f = np.empty_like(r)
        f[1:] = self.u_inner[1:] / r[1:]
        f[0] = 1.0  # u'(0) = 1 by construction
        return f * self._scale

    @cached_property
    def t_outer(self) -> np.ndarray:
        """Uniform grid in t = log r on [R, D]."""
        return np.linspace(np.log(self.R), np.log(self.D), self.n_outer + 1)

    @cached_property
    def r_outer(self) -> np.ndarray:
        r = np.exp(self.t_outer)
        r[0], r[-1] = self.R, self.D
        return r

    @cached_property
    def f_outer(self) -> np.ndarray:
        return self.f_at(self.r_outer)

    def f_at(self, r) -> np.ndarray:
        """f at arbitrary radii; cubic interpolation inside, closed form outside."""
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        mask = r >= self.R
        u, _ = _outer(self.u_R, self.du_R, self.lam, r[mask] - self.R)
        out[mask] = u / r[mask] * self._scale
        if np.any(~mask):
            from scipy.interpolate import CubicSpline

            spline = CubicSpline(self.r_inner, self.f_inner)
            out[~mask] = spline(r[~mask])
        return out

    @property
    def integral_Vf(self) -> float:
        return integral_Vf(self)

    def to_dict(self) -> dict:
        return {
            "schema": CACHE_SCHEMA,
            "potential": self.potential.to_dict(),
            "N": self.N,
            "ell": self.ell,
            "lam": self.lam,
            "a0": self.a0,
            "u_R": self.u_R,
            "du_R": self.du_R,
            "n_inner": len(self.r_inner) - 1,
            "n_outer": self.n_outer,
            "u_inner": self.u_inner.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScatteringSolution":
        if d.get("schema") != CACHE_SCHEMA:
            raise ValueError("cached solution has an incompatible schema version")
        V = RadialPotential.from_dict(d["potential"])
        n = int(d["n_inner"])
        return cls(potential=V, N=d["N"], ell=d["ell"], lam=d["lam"], a0=d["a0"], u_R=d["u_R"],
                   du_R=d["du_R"], r_inner=np.linspace(0.0, V.support_radius, n + 1),
                   u_inner=np.asarray(d["u_inner"], dtype=float), n_outer=int(d["n_outer"]))


def _neumann_mismatch(V, D, n, lam):
    uR, duR = _boundary_data(V, lam, n)
    uD, duD = _outer(uR, duR, lam, D - V.support_radius)
    return (D * duD - uD) / duR


def solve_neumann(V: RadialPotential, N: float, ell: float = DEFAULT_ELL, grid: int = DEFAULT_INNER,
                  n_outer: int = DEFAULT_OUTER) -> ScatteringSolution:
    """Lowest Neumann eigenpair on the ball of radius D = N*ell.

    The mismatch D u'(D) - u(D) is positive at lam = 0 (it equals a0 u'(R))
    and negative once the outer phase reaches pi, which brackets the nodeless
    branch; the root is polished with Brent's method.
    """
    if not 0.0 < ell < 0.5:
        raise ValueError(f"ell must lie in (0, 1/2), got {ell}")
    D = N * ell
    R = V.support_radius
    if D <= R:
        raise ValueError(f"N*ell = {D} must exceed the support radius {R}")
    if grid % 2 or n_outer % 2:
        raise ValueError("grid sizes must be even (Simpson quadrature)")
    a0 = scattering_length(V, max(2 * R, min(D, 4 * R)), grid) if not V.is_zero else 0.0

    g = lambda lam: _neumann_mismatch(V, D, grid, lam)
    g0 = g(0.0)
    if g0 == 0.0 or V.is_zero:
        lam = 0.0
    else:
        hi = (np.pi / D) ** 2
        lam_cap = max(0.5 * V.max_value, hi)
        while g(hi) > 0:
            hi *= 2.0
            if hi > lam_cap:
                raise ScatteringError("could not bracket the Neumann ground-state eigenvalue")
        lam = brentq(g, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)

    r, u, du = _inner_profile(V, lam, grid)
    uR, duR = float(u[-1]), float(du[-1])
    sol = ScatteringSolution(potential=V, N=N, ell=ell, lam=float(lam), a0=a0, u_R=uR, du_R=duR,
                             r_inner=r, u_inner=u, n_outer=n_outer)
    if np.any(sol.f_inner <= 0) or np.any(sol.f_outer <= 0):
        raise ScatteringError("non-positive f: the solver landed on an excited branch")
    return sol


def solve_neumann_cached(V: RadialPotential, N: float, ell: float = DEFAULT_ELL, grid: int = DEFAULT_INNER,
                         n_outer: int = DEFAULT_OUTER, cache_dir: str | os.PathLike | None = None
                         ) -> ScatteringSolution:
    """solve_neumann with an on-disk JSON cache keyed by (V, N, ell, grid, schema).

    The cache directory defaults to $GPCLT_CACHE_DIR; without it nothing is cached.
    """
    cache_dir = cache_dir or os.environ.get(CACHE_ENV)
    if not cache_dir:
        return solve_neumann(V, N, ell, grid, n_outer)
    key = f"v{CACHE_SCHEMA}_{V.digest()}_N{N!r}_l{ell!r}_g{grid}_o{n_outer}.json"
    path = Path(cache_dir) / key
    if path.exists():
        try:
            return ScatteringSolution.from_dict(json.loads(path.read_text()))
        except (ValueError, KeyError) as exc:
            log.warning("ignoring unreadable cache entry %s: %s", path, exc)
    sol = solve_neumann(V, N, ell, grid, n_outer)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(sol.to_dict()))
    tmp.replace(path)
    return sol


# ---------------------------------------------------------------------------
# integrals and radial Fourier transforms


def _j0(x):
    return np.sinc(np.asarray(x) / np.pi)


def integral_Vf(sol: ScatteringSolution) -> float:
    """4*pi * int_0^D V f r^2 dr."""
    r = sol.r_inner
    y = sol.potential.inside(r) * sol.f_inner * r**2
    return float(4 * np.pi * simpson(y, r[1] - r[0]))


def vf_deviation(sol: ScatteringSolution) -> float:
    """|int V f - 8 pi a0|."""
    return abs(integral_Vf(sol) - 8 * np.pi * sol.a0)


def Vf_hat(sol: ScatteringSolution, k) -> np.ndarray:
    """Radial Fourier transform of V f at wavenumber(s) k >= 0."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    r = sol.r_inner
    base = sol.potential.inside(r) * sol.f_inner * r**2
    vals = 4 * np.pi * simpson(base[None, :] * _j0(np.outer(k, r)), r[1] - r[0])
    return vals


def w_hat(sol: ScatteringSolution, k) -> np.ndarray:
    """Radial Fourier transform of w = 1 - f, extended by zero beyond |x| = D.

    The outer grid is uniform in log r, so its widest step sits at r = D;
    wavenumbers it cannot resolve (k * dr > MAX_PHASE_STEP) are refused.
    """
    k = np.atleast_1d(np.asarray(k, dtype=float))
    dr_max = sol.D * (1.0 - np.exp(-(sol.t_outer[1] - sol.t_outer[0])))
    if k.size and float(np.max(k)) * dr_max > MAX_PHASE_STEP:
        raise ValueError(f"wavenumber {np.max(k):.3g} is not resolved by the outer grid "
                         f"(step {dr_max:.3g} at r = D); raise n_outer")
    r_in = sol.r_inner
    inner = (1.0 - sol.f_inner) * r_in**2
    r_out = sol.r_outer
    outer = (1.0 - sol.f_outer) * r_out**3  # dr = r dt
    vals = np.empty(k.shape)
    # chunk to bound memory on long k lists
    for s in range(0, k.size, 256):
        kk = k[s:s + 256]
        a = simpson(inner[None, :] * _j0(np.outer(kk, r_in)), r_in[1] - r_in[0])
        b = simpson(outer[None, :] * _j0(np.outer(kk, r_out)), sol.t_outer[1] - sol.t_outer[0])
        vals[s:s + 256] = 4 * np.pi * (a + b)
    return vals
