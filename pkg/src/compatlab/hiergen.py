"""Hierarchical words built from L-adic valuations, their inflated variant
and the binary sequence whose zero set is a discrete fractal."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .fracdim import IntegerSet
from .runword import WeightedWord
from .seqcore import BinaryWindow, InvalidOperand


@dataclass(frozen=True)
class HierarchySpec:
    """Base ``L``; grouping parameter ``M = 3(L+1)``; Bernoulli threshold
    ``1/(576 (L+1)^2)``, which equals ``1/(64 M^2)``."""

    L: int
    M: int = field(init=False)
    p_threshold: Fraction = field(init=False)

    def __post_init__(self):
        if self.L < 2:
            raise InvalidOperand("L must be at least 2")
        object.__setattr__(self, "M", 3 * (self.L + 1))
        object.__setattr__(self, "p_threshold", Fraction(1, 576 * (self.L + 1) ** 2))

    @property
    def dimension(self) -> float:
        """Dimension of the zero set, log L / log M."""
        return math.log(self.L) / math.log(self.M)


def _spec(spec) -> HierarchySpec:
    return spec if isinstance(spec, HierarchySpec) else HierarchySpec(int(spec))


def valuation(L: int, j: int) -> int:
    """Exponent of the largest power of ``L`` dividing ``j``."""
    if j < 1:
        raise InvalidOperand("index must be positive")
    k = 0
    while j % L == 0:
        j //= L
        k += 1
    return k


def zeta_at(spec, j: int) -> int:
    return valuation(_spec(spec).L, j)


def valuation_array(L: int, start: int, n: int) -> np.ndarray:
    """Valuations of ``start, start+1, ..., start+n-1`` as an int64 array."""
    out = np.zeros(n, dtype=np.int64)
    if n == 0:
        return out
    last = start + n - 1
    power = L
    while power <= last:
        first = (-start) % power  # offset of the first multiple of ``power``
        out[first::power] += 1
        power *= L
    return out


def zeta_window(spec, n: int) -> WeightedWord:
    return WeightedWord(tuple(valuation_array(_spec(spec).L, 1, n).tolist()))


def shifted_zeta_at(spec, m: int, n_shift: int, j: int) -> int:
    """Entry ``j`` of the hierarchical word shifted by ``m * L**n_shift``."""
    L = _spec(spec).L
    return valuation(L, j + m * L**n_shift)


def shifted_zeta_window(spec, offset: int, n: int) -> WeightedWord:
    """Entries ``offset+1 .. offset+n`` of the hierarchical word."""
    return WeightedWord(tuple(valuation_array(_spec(spec).L, offset + 1, n).tolist()))


def tilde_zeta_at(spec, j: int) -> int:
    s = _spec(spec)
    k = valuation(s.L, j)
    return 3 * s.M ** (k - 1) if k else 0


def tilde_zeta_window(spec, n: int) -> WeightedWord:
    s = _spec(spec)
    vals = valuation_array(s.L, 1, n)
    lookup = [0] + [3 * s.M ** (k - 1) for k in range(1, int(vals.max(initial=0)) + 1)]
    return WeightedWord(tuple(lookup[k] for k in vals.tolist()))


def _eta_zero_positions(spec: HierarchySpec, n_bits: int) -> np.ndarray:
    """1-based zero positions among the first ``n_bits`` of the binary sequence."""
    zeros = []
    pos = 0  # bits emitted so far
    j = 0
    while pos < n_bits:
        j += 1
        w = tilde_zeta_at(spec, j)
        if w == 0:
            pos += 1
            zeros.append(pos)
        else:
            pos += w
    return np.asarray(zeros, dtype=np.int64)


@lru_cache(maxsize=8)
def _cached_zeros(L: int, n_bits: int) -> np.ndarray:
    z = _eta_zero_positions(HierarchySpec(L), n_bits)
    z.setflags(write=False)
    return z


def eta_window(spec, n_bits: int) -> BinaryWindow:
    """First ``n_bits`` symbols of the decoded inflated hierarchical word.

    Only as many word entries as the window needs are generated.
    """
    s = _spec(spec)
    if n_bits < 1:
        raise InvalidOperand("n_bits must be positive")
    bits = np.ones(n_bits, dtype=np.uint8)
    bits[_cached_zeros(s.L, n_bits) - 1] = 0
    return BinaryWindow(bits.tobytes())


def zero_set(spec, n_bits: int) -> IntegerSet:
    s = _spec(spec)
    if n_bits < 1:
        raise InvalidOperand("n_bits must be positive")
    return IntegerSet(np.array(_cached_zeros(s.L, n_bits)))


def smallest_L_for(eps: float) -> int:
    """Least L with log L / log(3(L+1)) > 1 - eps."""
    if not 0 < eps < 1:
        raise InvalidOperand("eps must lie in (0, 1)")
    L = 2
    while HierarchySpec(L).dimension <= 1 - eps:
        L = L * 2
    lo, hi = L // 2, L
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if HierarchySpec(mid).dimension > 1 - eps:
            hi = mid
        else:
            lo = mid
    return hi if HierarchySpec(max(lo, 2)).dimension <= 1 - eps else max(lo, 2)


__all__ = [
    "HierarchySpec",
    "valuation",
    "valuation_array",
    "zeta_at",
    "zeta_window",
    "shifted_zeta_at",
    "shifted_zeta_window",
    "tilde_zeta_at",
    "tilde_zeta_window",
    "eta_window",
    "zero_set",
    "smallest_L_for",
]
