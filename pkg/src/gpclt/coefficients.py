"""Per-mode Bogoliubov data: eta, sigma, gamma, F, G, tau, mu.

All coefficients depend on p only through |p|, so they are evaluated once per
distinct |p|^2 on the mode set and scattered back.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .lattice import ModeSet, Momentum, dyadic_shells
from .scattering import ScatteringSolution, Vf_hat, w_hat


class DiagonalizationError(ArithmeticError):
    """|G/F| >= 1: the quadratic form cannot be diagonalized on this branch."""


def _k(p, N):
    p2 = p.p2 if isinstance(p, Momentum) else float(p)
    return np.sqrt(p2) / N, p2


def eta(sol: ScatteringSolution, N: float, p: Momentum) -> float:
    k, _ = _k(p, N)
    return float(-w_hat(sol, k)[0] / N**2)


def mu(a0: float, p) -> np.ndarray:
    """(1/4) log(p^2 / (p^2 + 16 pi a0)); ``p`` is a Momentum or an array of p^2."""
    if a0 < 0:
        raise ValueError("scattering length must be non-negative")
    p2 = p.p2 if isinstance(p, Momentum) else np.asarray(p, dtype=float)
    # log1p keeps the large-|p| tail accurate
    return -0.25 * np.log1p(16 * np.pi * a0 / p2)


def F_G(Vf_k, p2, eta_p):
    """F and G from the coupling Vf_hat(|p|/N), p^2 and eta_p (vectorized)."""
    s, c = np.sinh(eta_p), np.cosh(eta_p)
    F = p2 * (s * s + c * c) + Vf_k * (s + c) ** 2
    G = 2 * p2 * s * c + Vf_k * (s + c) ** 2
    if np.any(np.asarray(F) <= 0):
        raise DiagonalizationError("F_p <= 0; the inputs do not describe a repulsive system")
    return F, G


def tau(F, G):
    """Principal branch of tanh(2 tau) = -G/F."""
    ratio = -np.asarray(G, dtype=float) / np.asarray(F, dtype=float)
    if np.any(np.abs(ratio) >= 1):
        raise DiagonalizationError("|G/F| >= 1: no real Bogoliubov angle")
    return 0.5 * np.arctanh(ratio)


def eta_plus_tau_closed(Vf_k, p2):
    """(1/4) log(p^2 / (p^2 + 2 Vf_hat(|p|/N)))."""
    return -0.25 * np.log1p(2 * np.asarray(Vf_k) / np.asarray(p2))


@dataclass
class ModeCoefficients:
    modes: ModeSet
    N: float
    a0: float
    eta: np.ndarray = field(repr=False)
    Vf: np.ndarray = field(repr=False)
    F: np.ndarray = field(repr=False)
    G: np.ndarray = field(repr=False)
    tau: np.ndarray = field(repr=False)
    mu: np.ndarray = field(repr=False)
    eta_plus_tau_closed: np.ndarray = field(repr=False)

    @property
    def sigma(self):
        return np.sinh(self.eta)

    @property
    def gamma(self):
        return np.cosh(self.eta)

    @property
    def closed_form_gap(self) -> float:
        """max |(eta + tau) - closed form| over modes."""
        return float(np.max(np.abs(self.eta + self.tau - self.eta_plus_tau_closed)))

    @property
    def step4_gap(self) -> float:
        """max |eta + tau - mu| over modes."""
        return float(np.max(np.abs(self.eta + self.tau - self.mu)))

    def shell_max(self, values, power: int) -> dict[int, float]:
        """max over each dyadic |p| shell of |values| * |p|^power."""
        ap = self.modes.abs_p
        shells = dyadic_shells(ap)
        scaled = np.abs(values) * ap**power
        return {int(j): float(scaled[shells == j].max()) for j in np.unique(shells)}

    def rows(self):
        for i, m in enumerate(self.modes):
            yield (*m.n, self.modes.abs_p[i], self.eta[i], self.tau[i], self.mu[i], self.F[i], self.G[i])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n1", "n2", "n3", "abs_p", "eta", "tau", "mu", "F", "G"])
        for row in self.rows():
            w.writerow([*row[:3]] + [f"{x:.16e}" for x in row[3:]])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "N": self.N,
            "a0": self.a0,
            "modes": [list(m.n) for m in self.modes],
            "eta": self.eta.tolist(),
            "tau": self.tau.tolist(),
            "mu": self.mu.tolist(),
            "F": self.F.tolist(),
            "G": self.G.tolist(),
            "eta_plus_tau_closed": self.eta_plus_tau_closed.tolist(),
        }


def compute_coefficients(sol: ScatteringSolution, modes: ModeSet, N: float | None = None) -> ModeCoefficients:
    N = sol.N if N is None else N
    p2 = modes.p2
    uniq, inv = np.unique(np.round(p2 / (4 * np.pi**2)).astype(int), return_inverse=True)
    p2u = 4 * np.pi**2 * uniq.astype(float)
    k = np.sqrt(p2u) / N
    eta_u = -w_hat(sol, k) / N**2
    vf_u = Vf_hat(sol, k)
    F_u, G_u = F_G(vf_u, p2u, eta_u)
    tau_u = tau(F_u, G_u)
    return ModeCoefficients(
        modes=modes,
        N=N,
        a0=sol.a0,
        eta=eta_u[inv],
        Vf=vf_u[inv],
        F=F_u[inv],
        G=G_u[inv],
        tau=tau_u[inv],
        mu=mu(sol.a0, p2u)[inv],
        eta_plus_tau_closed=eta_plus_tau_closed(vf_u, p2u)[inv],
    )


def shell_variation(shell_max: dict[int, float]) -> float:
    vals = np.array(list(shell_max.values()))
    return float(vals.max() / vals.min())


def coefficients_json(coeffs: ModeCoefficients) -> str:
    return json.dumps(coeffs.to_json(), sort_keys=True)
