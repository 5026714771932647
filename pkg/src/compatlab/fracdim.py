"""Size exponents of integer sets: mass dimensions, a discrete Hausdorff
dimension built from interval covers of dyadic-style annuli, the upper
entropy index, and checkers for two sufficient conditions under which these
exponents coincide.

All asymptotic notions are judged on finite profiles.  Every report carries
the raw profile so a verdict can be re-examined with a different rule.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .seqcore import InvalidOperand

ALPHA_GRID = np.round(np.arange(0.01, 1.5 + 1e-9, 0.01), 2)


@dataclass(frozen=True)
class IntegerSet:
    """Sorted distinct integers; ``symmetric_reflect`` adds the mirror image
    ``-A`` to every query, giving a two-sided copy of a one-sided set."""

    points: np.ndarray
    symmetric_reflect: bool = False

    def __post_init__(self):
        pts = np.unique(np.asarray(self.points, dtype=np.int64))
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_iter(cls, values, symmetric_reflect: bool = False) -> "IntegerSet":
        return cls(np.fromiter((int(v) for v in values), dtype=np.int64), symmetric_reflect)

    def reflected(self, on: bool = True) -> "IntegerSet":
        return IntegerSet(self.points, on)

    @property
    def effective(self) -> np.ndarray:
        """Points actually queried (including the mirror copy when reflecting)."""
        if not self.symmetric_reflect:
            return self.points
        return np.union1d(-self.points, self.points)

    def __len__(self) -> int:
        return int(self.effective.size)

    def count(self, lo, hi) -> int:
        """Number of points in the half-open real interval [lo, hi)."""
        pts = self.effective
        return int(np.searchsorted(pts, hi, "left") - np.searchsorted(pts, lo, "left"))

    def within(self, intervals: Sequence[tuple[int, int]]) -> np.ndarray:
        """Points lying in a union of half-open integer intervals."""
        pts = self.effective
        parts = [pts[np.searchsorted(pts, a, "left") : np.searchsorted(pts, b, "left")] for a, b in intervals]
        return np.concatenate(parts) if parts else pts[:0]


def annulus(r: int, n: int) -> list[tuple[int, int]]:
    """``[-r^n, r^n)`` with ``[-r^(n-1), r^(n-1))`` removed; for n = 1 the whole of ``[-r, r)``."""
    if r < 2 or n < 1:
        raise InvalidOperand("need r >= 2 and n >= 1")
    hi = r**n
    if n == 1:
        return [(-hi, hi)]
    lo = r ** (n - 1)
    return [(-hi, -lo), (lo, hi)]


def diameter(F: Sequence[tuple[int, int]]) -> int:
    """Cardinality of the integer hull of a union of half-open intervals."""
    return max(b for _, b in F) - min(a for a, _ in F)


def _mass_scales(n_max: int, r: int) -> list[int]:
    out, n = [], r
    while n <= n_max:
        out.append(n)
        n *= r
    return out


@dataclass(frozen=True)
class MassDimReport:
    """Mass-dimension profile.

    ``lower``/``upper`` bracket the exponent by the smallest and largest
    local log-log slopes over the last three scale steps.  ``ratios`` holds
    the plain ``log count / log n`` values; they share the same liminf and
    limsup but approach them only like ``1 / log n``.
    """

    lower: float
    upper: float
    scales: list[int]
    counts: list[int]
    ratios: list[float]
    slopes: list[float]

    @property
    def ratio_lower(self) -> float:
        return min(self.ratios[-3:])

    @property
    def ratio_upper(self) -> float:
        return max(self.ratios[-3:])

    def to_json(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "ratio_lower": self.ratio_lower,
            "ratio_upper": self.ratio_upper,
            "scales": self.scales,
            "counts": self.counts,
            "ratios": self.ratios,
            "slopes": self.slopes,
        }


def mass_dim_estimate(A: IntegerSet, n_max: int, r: int = 2) -> MassDimReport:
    """Mass dimensions from counts ``|A ∩ [-n/2, n/2)|`` at ``n = r^j <= n_max``.

    Bounds come from the local slopes ``Δ log count / Δ log n`` of the last
    three steps (at least four scales are needed).  By Stolz-Cesàro the
    slopes bracket the liminf and limsup of ``log count / log n``.
    """
    scales = _mass_scales(n_max, r)
    if len(scales) < 4:
        raise InvalidOperand("n_max must reach at least r^4")
    counts = [A.count(-n / 2, n / 2) for n in scales]
    ratios = [math.log(c) / math.log(n) if c > 0 else 0.0 for c, n in zip(counts, scales)]
    slopes = []
    for (c0, n0), (c1, n1) in zip(zip(counts, scales), zip(counts[1:], scales[1:])):
        slopes.append((math.log(c1) - math.log(c0)) / math.log(n1 / n0) if c0 > 0 else 0.0)
    tail = slopes[-3:]
    return MassDimReport(min(tail), max(tail), scales, counts, ratios, slopes)


# -- interval covers --------------------------------------------------------


def _blocks(pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Maximal runs of consecutive integers, as (first, last) arrays."""
    if pts.size == 0:
        return pts, pts
    cut = np.flatnonzero(np.diff(pts) > 1)
    starts = np.concatenate(([0], cut + 1))
    ends = np.concatenate((cut, [pts.size - 1]))
    return pts[starts], pts[ends]


def min_cover_cost(pts: np.ndarray, alpha: float) -> float:
    """Least ``sum d(B)^alpha`` over covers of ``pts`` by integer intervals.

    For ``alpha >= 1`` splitting never hurts, so singletons are optimal.  For
    ``alpha < 1`` cost is subadditive, so an optimal cover never cuts a run
    of consecutive integers; the dynamic program runs over such runs and
    groups consecutive runs under one interval.
    """
    if alpha <= 0:
        raise InvalidOperand("alpha must be positive")
    pts = np.asarray(pts, dtype=np.int64)
    if pts.size == 0:
        return 0.0
    if alpha >= 1:
        return float(pts.size)
    first, last = _blocks(pts)
    first = first.astype(np.float64)
    last = last.astype(np.float64)
    best = np.zeros(first.size + 1)
    for i in range(first.size):
        spans = last[i] - first[: i + 1] + 1.0
        best[i + 1] = np.min(best[: i + 1] + spans**alpha)
    return float(best[-1])


def nu_alpha(A: IntegerSet, F: Sequence[tuple[int, int]], alpha: float) -> float:
    """Optimal cover cost of ``A ∩ F`` normalised by ``d(F)^alpha``."""
    return min_cover_cost(A.within(F), alpha) / diameter(F) ** alpha


def _annulus_points(A: IntegerSet, r: int, n_max: int) -> list[np.ndarray]:
    out, n = [], 1
    while r**n <= n_max:
        out.append(A.within(annulus(r, n)))
        n += 1
    return out


def _decay_ratio(terms: np.ndarray) -> float:
    """Geometric ratio fitted to the positive terms of the later half of the
    profile (never including n = 1, whose shell is a full interval).

    A tail ending in an exact zero counts as ratio 0.
    """
    start = max(1, (terms.size - 1) // 2)
    tail = terms[start:] if terms.size > 2 else terms
    if tail.size == 0 or tail[-1] == 0:
        return 0.0
    pos = tail > 0
    if pos.sum() < 2:
        return 0.0 if tail[-1] == 0 else 1.0
    n = np.arange(tail.size)[pos]
    slope = np.polyfit(n, np.log(tail[pos]), 1)[0]
    return float(math.exp(slope))


def _least_summable(ratios: dict[float, float], cutoff: float) -> float:
    """Least grid alpha from which every larger alpha is judged summable."""
    est = None
    for a in sorted(ratios, reverse=True):
        if ratios[a] < cutoff:
            est = a
        else:
            break
    return float(est) if est is not None else float("inf")


@dataclass(frozen=True)
class HausdorffReport:
    estimate: float
    alphas: list[float]
    partial_sums: list[float]
    ratios: list[float]
    terms: dict = field(repr=False, default_factory=dict)

    def to_json(self) -> dict:
        return {
            "estimate": self.estimate,
            "alphas": self.alphas,
            "partial_sums": self.partial_sums,
            "ratios": self.ratios,
        }


def hausdorff_dim_estimate(
    A: IntegerSet, r: int, n_max: int, alphas=ALPHA_GRID, ratio_cutoff: float = 0.95
) -> HausdorffReport:
    """Least grid alpha at which the annulus cover costs decay geometrically
    with fitted ratio below ``ratio_cutoff``."""
    shells = _annulus_points(A, r, n_max)
    if not shells:
        raise InvalidOperand("n_max must be at least r")
    diam = np.array([diameter(annulus(r, n)) for n in range(1, len(shells) + 1)], dtype=np.float64)
    ratios, sums, terms = {}, [], {}
    for a in alphas:
        t = np.array([min_cover_cost(p, a) for p in shells]) / diam**a
        terms[float(a)] = t.tolist()
        sums.append(float(t.sum()))
        ratios[float(a)] = _decay_ratio(t)
    est = _least_summable(ratios, ratio_cutoff)
    if not len(A):
        est = 0.0
    return HausdorffReport(est, [float(a) for a in alphas], sums, [ratios[float(a)] for a in alphas], terms)


# -- packing counts ---------------------------------------------------------


def packing_count(pts: np.ndarray, d: int) -> int:
    """Most disjoint intervals ``[x-d, x+d)`` with centres ``x`` in ``pts``.

    Leftmost-first greedy: after choosing ``x`` the next centre must be at
    least ``x + 2d``.
    """
    if pts.size == 0:
        return 0
    count, i, n = 0, 0, pts.size
    while i < n:
        count += 1
        i = int(np.searchsorted(pts, pts[i] + 2 * d, "left"))
    return count


def packing_profile(pts: np.ndarray, d_max: int) -> list[tuple[int, int]]:
    """Pieces ``(d, N(d))`` where ``d`` is the largest value giving that count.

    N is nonincreasing in d, so the maximum of ``d^alpha N(d)`` over a piece
    sits at the piece's right end.
    """
    out = []
    d = 1
    while d <= d_max:
        c = packing_count(pts, d)
        lo, hi = d, d_max
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if packing_count(pts, mid) == c:
                lo = mid
            else:
                hi = mid - 1
        out.append((lo, c))
        d = lo + 1
    return out


@dataclass(frozen=True)
class EntropyReport:
    estimate: float
    per_eps: dict
    alphas: list[float]
    slopes: dict

    def to_json(self) -> dict:
        return {"estimate": self.estimate, "per_eps": self.per_eps, "alphas": self.alphas, "slopes": self.slopes}


def entropy_index(
    A: IntegerSet,
    r: int,
    n_max: int,
    eps: Sequence[float] = (0.1, 0.2),
    alphas=ALPHA_GRID,
    ratio_cutoff: float = 1.0,
) -> EntropyReport:
    """Least grid alpha at which ``max_d (d r^-n)^alpha N(d, A ∩ I_n)`` is
    judged to tend to 0 for every listed ``eps``.

    "Tends to 0" means the geometric ratio fitted over the later half of
    the profile is below ``ratio_cutoff``.
    """
    shells = _annulus_points(A, r, n_max)
    if not shells:
        raise InvalidOperand("n_max must be at least r")
    per_eps, slopes = {}, {}
    for e in eps:
        profiles = []
        for n, p in enumerate(shells, start=1):
            d_max = max(1, int(math.floor(r ** (n * (1 - e)) + 1e-9)))
            profiles.append((n, np.array(packing_profile(p, d_max), dtype=np.float64).reshape(-1, 2)))
        ratios = {}
        for a in alphas:
            vals = []
            for n, prof in profiles:
                if prof.size == 0:
                    vals.append(0.0)
                    continue
                vals.append(float(np.max((prof[:, 0] / r**n) ** a * prof[:, 1])))
            ratios[float(a)] = _decay_ratio(np.array(vals))
        per_eps[e] = _least_summable(ratios, ratio_cutoff)
        slopes[e] = [ratios[float(a)] for a in alphas]
    est = max(per_eps.values()) if len(A) else 0.0
    return EntropyReport(est, {str(k): v for k, v in per_eps.items()}, [float(a) for a in alphas], {str(k): v for k, v in slopes.items()})


# -- sufficient conditions --------------------------------------------------


def _fit_exponent(r: int, ns: Sequence[int], counts: Sequence[float]) -> float:
    c = np.asarray(counts, dtype=np.float64)
    if np.any(c <= 0) or len(ns) < 2:
        return float("nan")
    return float(np.polyfit(np.asarray(ns) * math.log(r), np.log(c), 1)[0])


def _max_window_count(pts: np.ndarray, width: int) -> int:
    """Most points in a half-open window of the given width."""
    if pts.size == 0:
        return 0
    return int(np.max(np.searchsorted(pts, pts + width, "left") - np.arange(pts.size)))


@dataclass(frozen=True)
class ConditionReport:
    holds: bool
    alpha: float
    c_lower: float
    c_upper: float
    exponent_lower: float
    exponent_upper: float
    ns: list[int]
    lower_counts: list[int]
    upper_counts: list[int]

    def to_json(self) -> dict:
        return dict(self.__dict__)


def _verdict(alpha, ns, r, low, up, tol) -> ConditionReport:
    scale = [r ** (n * alpha) for n in ns]
    c_low = min(l / s for l, s in zip(low, scale)) if ns else 0.0
    c_up = max(u / s for u, s in zip(up, scale)) if ns else 0.0
    e_low = _fit_exponent(r, ns, low)
    e_up = _fit_exponent(r, ns, up)
    holds = (
        c_low > 0
        and not math.isnan(e_low)
        and not math.isnan(e_up)
        and abs(e_low - alpha) <= tol
        and abs(e_up - alpha) <= tol
    )
    return ConditionReport(bool(holds), alpha, c_low, c_up, e_low, e_up, list(ns), list(low), list(up))


def check_C2(A: IntegerSet, r: int, alpha: float, n_range: Sequence[int], tol: float = 0.05) -> ConditionReport:
    """Lower count on ``[-r^n, r^n)`` and upper count on every window
    ``[x - r^n, x + r^n)``, both of order ``r^(n alpha)``.

    Constants are the extreme ratios over ``n_range``; positive constants
    are accepted when both fitted exponents lie within ``tol`` of alpha.
    """
    pts = A.effective
    ns = list(n_range)
    low = [A.count(-(r**n), r**n) for n in ns]
    up = [_max_window_count(pts, 2 * r**n) for n in ns]
    return _verdict(alpha, ns, r, low, up, tol)


def check_T3(
    A: IntegerSet, r: int, alpha: float, n_range: Sequence[int], tol: float = 0.05, samples: int = 1000, seed: int = 0
) -> ConditionReport:
    """Lower count around every member ``x`` and upper count on ``[-r^n, r^n)``.

    Large sets are probed at ``samples`` uniformly drawn members plus both
    extremes.
    """
    pts = A.effective
    ns = list(n_range)
    if pts.size > samples + 2:
        rng = np.random.default_rng(seed)
        probe = np.unique(np.concatenate((pts[[0, -1]], rng.choice(pts, samples, replace=False))))
    else:
        probe = pts
    low = []
    for n in ns:
        if probe.size == 0:
            low.append(0)
            continue
        cnt = np.searchsorted(pts, probe + r**n, "left") - np.searchsorted(pts, probe - r**n, "left")
        low.append(int(cnt.min()))
    up = [A.count(-(r**n), r**n) for n in ns]
    return _verdict(alpha, ns, r, low, up, tol)


__all__ = [
    "IntegerSet",
    "annulus",
    "diameter",
    "mass_dim_estimate",
    "MassDimReport",
    "min_cover_cost",
    "nu_alpha",
    "hausdorff_dim_estimate",
    "HausdorffReport",
    "packing_count",
    "packing_profile",
    "entropy_index",
    "EntropyReport",
    "check_C2",
    "check_T3",
    "ConditionReport",
]
