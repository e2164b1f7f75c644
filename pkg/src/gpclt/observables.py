"""Bounded one-particle observables reduced to the Fourier data of q0 O phi0."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import ModeSet, Momentum


@dataclass(frozen=True)
class ObservableSpec:
    """Fourier data of q0 O phi0 on a mode set.

    fhat[i]    : coefficient of q0 O phi0 at modes[i]
    fbarhat[i] : coefficient of the complex conjugate of q0 O phi0 at modes[i]
    """

    modes: ModeSet
    mean: complex
    fhat: np.ndarray = field(repr=False)
    fbarhat: np.ndarray = field(repr=False)
    norm_bound: float = 0.0
    tail_sq: float = 0.0  # l2 mass discarded by the mode truncation
    name: str = ""

    @property
    def fhat_norm(self) -> float:
        return float(np.linalg.norm(self.fhat))


@dataclass(frozen=True)
class NuVector:
    modes: ModeSet
    values: np.ndarray = field(repr=False)

    @property
    def norm_sq(self) -> float:
        return float(np.vdot(self.values, self.values).real)

    @property
    def norm(self) -> float:
        return float(np.sqrt(self.norm_sq))

    def at(self, p: Momentum) -> complex:
        return complex(self.values[self.modes.index(p)])


def _conj_partner(modes: ModeSet, fhat: np.ndarray) -> np.ndarray:
    return np.conj(fhat[modes.neg_index])


def multiplier_sup_norm(coeffs: dict, points: int = 24) -> float:
    """sup |o(x)| of a trigonometric polynomial, estimated on a uniform grid of the torus."""
    if not coeffs:
        return 0.0
    ns = np.array(list(coeffs), dtype=float)
    cs = np.array(list(coeffs.values()), dtype=complex)
    x = np.arange(points) / points
    X = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1).reshape(-1, 3)
    vals = np.exp(2j * np.pi * X @ ns.T) @ cs
    return float(np.abs(vals).max())


def from_multiplier(fourier_coeffs: dict, modes: ModeSet, norm_bound: float | None = None,
                    name: str = "") -> ObservableSpec:
    """Multiplication by o(x) = sum_n ohat(n) exp(2 pi i n.x).

    ``fourier_coeffs`` maps integer triples to complex ohat(n); its support
    must be symmetric (n present implies -n present, possibly with zero value).
    Coefficients outside ``modes`` are dropped and their l2 mass recorded.
    """
    coeffs = {tuple(int(c) for c in n): complex(v) for n, v in fourier_coeffs.items()}
    for n in coeffs:
        if tuple(-c for c in n) not in coeffs:
            raise ValueError(f"asymmetric Fourier support: {n} present without its negative")
    fhat = np.zeros(len(modes), dtype=complex)
    tail = 0.0
    for n, v in coeffs.items():
        if n == (0, 0, 0):
            continue
        m = Momentum(n)
        if m in modes:
            fhat[modes.index(m)] = v
        else:
            tail += abs(v) ** 2
    if norm_bound is None:
        norm_bound = multiplier_sup_norm(coeffs)
    return ObservableSpec(modes=modes, mean=coeffs.get((0, 0, 0), 0j), fhat=fhat,
                          fbarhat=_conj_partner(modes, fhat), norm_bound=float(norm_bound),
                          tail_sq=float(tail), name=name)


def cosine(n0, modes: ModeSet, amplitude: float = 1.0) -> ObservableSpec:
    """o(x) = 2 a cos(2 pi n0.x), so ohat(+-n0) = a."""
    n0 = tuple(int(c) for c in n0)
    neg = tuple(-c for c in n0)
    return from_multiplier({n0: amplitude, neg: amplitude}, modes, norm_bound=2 * abs(amplitude),
                           name=f"cos{n0}")


def plane_wave(n0, modes: ModeSet) -> ObservableSpec:
    """o(x) = exp(2 pi i n0.x) (not self-adjoint)."""
    n0 = tuple(int(c) for c in n0)
    return from_multiplier({n0: 1.0, tuple(-c for c in n0): 0.0}, modes, norm_bound=1.0,
                           name=f"exp{n0}")


def momentum_diagonal(o0: complex, modes: ModeSet, norm_bound: float | None = None) -> ObservableSpec:
    """O = sum_p o(p) |e_p><e_p|: O phi0 = o(0) phi0, so q0 O phi0 vanishes."""
    zero = np.zeros(len(modes), dtype=complex)
    return ObservableSpec(modes=modes, mean=complex(o0), fhat=zero, fbarhat=zero.copy(),
                          norm_bound=abs(o0) if norm_bound is None else float(norm_bound),
                          name="momentum-diagonal")


def dressed_vector(spec: ObservableSpec, angle) -> NuVector:
    """fhat cosh(angle) + fbarhat sinh(angle), mode by mode.

    With angle = eta this is h_j, with eta + tau it is the intermediate
    vector, with mu it is the limiting nu_j.
    """
    angle = np.asarray(angle, dtype=float)
    if angle.shape != (len(spec.modes),):
        raise ValueError(f"angle has shape {angle.shape}, expected ({len(spec.modes)},)")
    return NuVector(spec.modes, spec.fhat * np.cosh(angle) + spec.fbarhat * np.sinh(angle))


def vector_distance(v1: NuVector, v2: NuVector) -> float:
    if v1.modes is not v2.modes and v1.modes.modes != v2.modes.modes:
        raise ValueError("vectors live on different mode sets")
    return float(np.linalg.norm(v1.values - v2.values))


def observable_from_config(entry: dict, modes: ModeSet) -> ObservableSpec:
    """Observable from a config entry: a preset (``cos``, ``exp``, ``diag``) or explicit triples."""
    kind = entry.get("preset")
    if kind == "cos":
        return cosine(entry["n0"], modes, entry.get("amplitude", 1.0))
    if kind == "exp":
        return plane_wave(entry["n0"], modes)
    if kind == "diag":
        return momentum_diagonal(entry.get("o0", 1.0), modes)
    if "coefficients" in entry:
        coeffs = {}
        for item in entry["coefficients"]:
            n, re, im = item[0], item[1], item[2] if len(item) > 2 else 0.0
            coeffs[tuple(n)] = complex(re, im)
        return from_multiplier(coeffs, modes, entry.get("norm_bound"), name=entry.get("name", ""))
    raise KeyError("observable needs either 'preset' or 'coefficients'")


__all__ = [
    "ObservableSpec",
    "NuVector",
    "from_multiplier",
    "cosine",
    "plane_wave",
    "momentum_diagonal",
    "dressed_vector",
    "vector_distance",
    "multiplier_sup_norm",
    "observable_from_config",
]
