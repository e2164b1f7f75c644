"""Truncated momentum lattice 2*pi*Z^3 minus the origin."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True, order=True)
class Momentum:
    """Lattice momentum p = 2*pi*n with n a nonzero integer triple."""

    n: tuple[int, int, int]

    def __post_init__(self):
        n = tuple(int(c) for c in self.n)
        if len(n) != 3:
            raise ValueError(f"momentum needs three components, got {self.n!r}")
        if n == (0, 0, 0):
            raise ValueError("the zero mode is not an excitation momentum")
        object.__setattr__(self, "n", n)

    @property
    def p(self) -> np.ndarray:
        return TWO_PI * np.asarray(self.n, dtype=float)

    @property
    def p2(self) -> float:
        return TWO_PI**2 * float(sum(c * c for c in self.n))

    @property
    def abs_p(self) -> float:
        return float(np.sqrt(self.p2))

    def __neg__(self) -> "Momentum":
        return negate(self)

    def __add__(self, other: "Momentum") -> "Momentum":
        return Momentum(tuple(a + b for a, b in zip(self.n, other.n)))


def negate(m: Momentum) -> Momentum:
    return Momentum(tuple(-c for c in m.n))


def is_low(m: Momentum, N: float) -> bool:
    """Low-momentum predicate |p| <= sqrt(N), evaluated as p^2 <= N."""
    return m.p2 <= N


@dataclass(frozen=True)
class ModeSet:
    """Ordered, negation-closed set of lattice momenta with a low/high split.

    ``low`` and ``high`` hold positions into ``modes``.
    """

    modes: tuple[Momentum, ...]
    cutoff: int
    N: float
    low: tuple[int, ...]
    high: tuple[int, ...]
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {m: i for i, m in enumerate(self.modes)})
        for m in self.modes:
            if negate(m) not in self._index:
                raise ValueError(f"mode set not closed under negation: {m.n} lacks its partner")

    def __len__(self) -> int:
        return len(self.modes)

    def __iter__(self):
        return iter(self.modes)

    def __contains__(self, m) -> bool:
        return m in self._index

    def index(self, m: Momentum) -> int:
        try:
            return self._index[m]
        except KeyError:
            raise KeyError(f"momentum {m.n} is not in the mode set") from None

    @property
    def n_array(self) -> np.ndarray:
        return np.array([m.n for m in self.modes], dtype=int).reshape(-1, 3)

    @property
    def p2(self) -> np.ndarray:
        return np.array([m.p2 for m in self.modes])

    @property
    def abs_p(self) -> np.ndarray:
        return np.sqrt(self.p2)

    @property
    def neg_index(self) -> np.ndarray:
        """Position of -p for every p, as an integer array."""
        return np.array([self._index[negate(m)] for m in self.modes], dtype=int)


def _split(modes, N):
    low = tuple(i for i, m in enumerate(modes) if is_low(m, N))
    high = tuple(i for i, m in enumerate(modes) if not is_low(m, N))
    return low, high


def build_mode_set(cutoff: int, N: float) -> ModeSet:
    """All n with 0 < |n|_inf <= cutoff, in lexicographic order."""
    if int(cutoff) < 1:
        raise ValueError(f"cutoff must be >= 1, got {cutoff}")
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    rng = range(-int(cutoff), int(cutoff) + 1)
    modes = tuple(Momentum(n) for n in itertools.product(rng, rng, rng) if n != (0, 0, 0))
    low, high = _split(modes, N)
    return ModeSet(modes=modes, cutoff=int(cutoff), N=N, low=low, high=high)


def mode_set_from(ns, N: float, low=None) -> ModeSet:
    """Mode set from an explicit list of integer triples (kept in lexicographic order).

    ``low`` optionally overrides the |p| <= sqrt(N) partition with an explicit
    list of low-momentum triples; every other mode is then high.
    """
    modes = tuple(sorted({Momentum(tuple(n)) for n in ns}))
    if low is None:
        lo, hi = _split(modes, N)
    else:
        low_set = {Momentum(tuple(n)) for n in low}
        missing = low_set.difference(modes)
        if missing:
            raise ValueError(f"low modes {[m.n for m in missing]} are not in the mode set")
        lo = tuple(i for i, m in enumerate(modes) if m in low_set)
        hi = tuple(i for i, m in enumerate(modes) if m not in low_set)
    cutoff = max((max(abs(c) for c in m.n) for m in modes), default=0)
    return ModeSet(modes=modes, cutoff=cutoff, N=N, low=lo, high=hi)


def dyadic_shells(abs_p: np.ndarray) -> np.ndarray:
    """Shell label j with 2**j <= |p| < 2**(j+1)."""
    return np.floor(np.log2(abs_p)).astype(int)
