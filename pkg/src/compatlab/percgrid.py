"""Dependent oriented percolation driven by two weighted words.

Vertex ``(x, y)`` with ``x, y >= 1`` is open when ``zeta[x] >= psi[y]``; the
origin is open and every other vertex on the axes is closed.  Edges go
straight up or diagonally up-right.  Row ``y`` is *heavy* when ``y = 0`` or
``psi[y] > 0``, and a path is *permitted* when its heavy vertices have
pairwise distinct (hence strictly increasing) x-coordinates.

Reachable sets are kept as Python integers used as bitsets (bit ``x`` set
when column ``x`` is reachable), and are only materialised at heavy rows:
the rows in between are entirely open, so crossing them widens a set by a
closed-form shift-and-or.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from .hiergen import valuation, valuation_array
from .runword import WeightedWord, first_index_at_least, is_M_spaced
from .seqcore import DECREMENT, DELETE_ZERO, FIRST, SECOND, InvalidOperand, WitnessSchedule, WitnessStep

Vertex = tuple[int, int]


class MalformedPath(ValueError):
    pass


# -- bitset helpers ---------------------------------------------------------


def _spread(mask: int, lo: int, hi: int, limit: int) -> int:
    """OR of ``mask << t`` for ``lo <= t <= hi``, keeping bits ``<= limit``."""
    if mask == 0 or hi < lo:
        return 0
    hi = min(hi, limit + 1)
    if hi < lo:
        return 0
    acc = mask << lo
    todo, done = hi - lo + 1, 1
    while done < todo:
        step = min(done, todo - done)
        acc |= acc << step
        done += step
    return acc & ((1 << (limit + 1)) - 1)


def mask_from_bool(arr: np.ndarray) -> int:
    """Bitset whose bit ``i`` is ``arr[i]``."""
    if arr.size == 0:
        return 0
    return int.from_bytes(np.packbits(arr.astype(np.uint8), bitorder="little").tobytes(), "little")


def mask_to_positions(mask: int) -> np.ndarray:
    if mask == 0:
        return np.zeros(0, dtype=np.int64)
    raw = np.frombuffer(mask.to_bytes((mask.bit_length() + 7) // 8, "little"), dtype=np.uint8)
    return np.flatnonzero(np.unpackbits(raw, bitorder="little")).astype(np.int64)


def positions_to_intervals(pos: np.ndarray) -> tuple[tuple[int, int], ...]:
    if pos.size == 0:
        return ()
    cut = np.flatnonzero(np.diff(pos) > 1)
    lo = np.concatenate(([pos[0]], pos[cut + 1]))
    hi = np.concatenate((pos[cut], [pos[-1]]))
    return tuple(zip(lo.tolist(), hi.tolist()))


def intervals_to_mask(intervals: Sequence[tuple[int, int]]) -> int:
    m = 0
    for lo, hi in intervals:
        m |= ((1 << (hi - lo + 1)) - 1) << lo
    return m


def _lowest_bit(m: int) -> int:
    return (m & -m).bit_length() - 1


# -- the configuration ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PercWindow:
    """Columns are labelled by ``zeta`` (x-axis) and rows by ``psi`` (y-axis)."""

    zeta: WeightedWord
    psi: WeightedWord

    @property
    def width(self) -> int:
        return len(self.zeta)

    @property
    def height(self) -> int:
        return len(self.psi)

    @cached_property
    def _z(self) -> np.ndarray:
        return self.zeta.capped_array()

    @cached_property
    def _p(self) -> np.ndarray:
        return self.psi.capped_array()

    @cached_property
    def heavy_rows(self) -> np.ndarray:
        """Heavy rows ``0 = r_0 < r_1 < ...`` inside the window."""
        return np.concatenate(([0], np.flatnonzero(self._p) + 1)).astype(np.int64)

    @cached_property
    def _open_cache(self) -> dict:
        return {}

    def open_mask(self, w: int) -> int:
        """Columns ``1 <= x <= width`` open on a row of weight ``w``."""
        cache = self._open_cache
        if w not in cache:
            arr = np.concatenate(([False], self._z >= w))
            cache[w] = mask_from_bool(arr)
        return cache[w]

    @property
    def column_mask(self) -> int:
        return ((1 << (self.width + 1)) - 1) ^ 1

    @cached_property
    def _sweep(self) -> tuple[list[int], list[int]]:
        """Reachable bitsets at every heavy row (row 0 holds only the origin)."""
        rows = [0]
        masks = [1]
        cur, prev = 1, 0
        W = self.width
        for j in self.heavy_rows[1:].tolist():
            if cur:
                cur = _spread(cur, 1, j - prev, W) & self.open_mask(int(self._p[j - 1]))
            rows.append(j)
            masks.append(cur)
            prev = j
        return rows, masks

    def weight_row(self, y: int) -> int:
        return self.psi.weights[y - 1] if y >= 1 else 0


def is_open(pw: PercWindow, v: Vertex) -> bool:
    x, y = v
    if not (0 <= x <= pw.width and 0 <= y <= pw.height):
        raise InvalidOperand(f"vertex {v} outside window {pw.width}x{pw.height}")
    if x == 0 or y == 0:
        return x == 0 and y == 0
    return pw.zeta.weights[x - 1] >= pw.psi.weights[y - 1]


def is_heavy(pw: PercWindow, v: Vertex) -> bool:
    y = v[1]
    if not 0 <= y <= pw.height:
        raise InvalidOperand(f"row {y} outside window")
    return y == 0 or pw.psi.weights[y - 1] > 0


@dataclass(frozen=True)
class ReachSet:
    row: int
    intervals: tuple[tuple[int, int], ...]

    @property
    def empty(self) -> bool:
        return not self.intervals

    @property
    def single(self) -> bool:
        return len(self.intervals) == 1

    @property
    def left(self) -> int:
        return self.intervals[0][0]

    @property
    def right(self) -> int:
        return self.intervals[-1][1]

    @property
    def size(self) -> int:
        return sum(b - a + 1 for a, b in self.intervals)

    def __contains__(self, x: int) -> bool:
        k = bisect.bisect_right(self.intervals, (x, float("inf"))) - 1
        return k >= 0 and self.intervals[k][0] <= x <= self.intervals[k][1]

    def to_json(self) -> dict:
        return {"row": self.row, "intervals": [list(iv) for iv in self.intervals]}


def _mask_at(pw: PercWindow, row: int) -> int:
    if not 0 <= row <= pw.height:
        raise InvalidOperand(f"row {row} outside window")
    rows, masks = pw._sweep
    k = bisect.bisect_right(rows, row) - 1
    h = rows[k]
    if h == row:
        return masks[k]
    return _spread(masks[k], 0, row - h, pw.width) & pw.column_mask


def reach_at(pw: PercWindow, row: int) -> ReachSet:
    """Columns on ``row`` reachable from the origin by open permitted paths."""
    return ReachSet(row, positions_to_intervals(mask_to_positions(_mask_at(pw, row))))


def reach_rows(pw: PercWindow) -> list[ReachSet]:
    """Reach sets at every heavy row and at the top row."""
    rows, masks = pw._sweep
    out = [ReachSet(r, positions_to_intervals(mask_to_positions(m))) for r, m in zip(rows, masks)]
    if rows[-1] != pw.height:
        out.append(reach_at(pw, pw.height))
    return out


def reach_from(pw: PercWindow, start_row: int, segment: Sequence[tuple[int, int]], target_row: int) -> ReachSet:
    """Columns on ``target_row`` reachable by open permitted paths that start
    anywhere in ``segment`` on ``start_row``.

    Start vertices must be open.  The first heavy vertex after a heavy start
    must lie strictly to the right of it; after a non-heavy start no such
    restriction applies.
    """
    if not 0 <= start_row <= target_row <= pw.height:
        raise InvalidOperand("rows out of order or outside window")
    W = pw.width
    cur = intervals_to_mask(segment) & (pw.column_mask | (1 if start_row == 0 else 0))
    if start_row > 0:
        cur &= pw.open_mask(pw.weight_row(start_row))
    heavy = pw.heavy_rows
    lo_i = int(np.searchsorted(heavy, start_row, "right"))
    hi_i = int(np.searchsorted(heavy, target_row, "right"))
    prev, strict = start_row, is_heavy(pw, (0, start_row))
    for j in heavy[lo_i:hi_i].tolist():
        cur = _spread(cur, 1 if strict else 0, j - prev, W) & pw.open_mask(pw.weight_row(j))
        prev, strict = j, True
    if prev != target_row:
        cur = _spread(cur, 0, target_row - prev, W) & pw.column_mask
    return ReachSet(target_row, positions_to_intervals(mask_to_positions(cur)))


# -- paths -------------------------------------------------------------------


@dataclass(frozen=True)
class PermittedPath:
    """Path stored by its waypoints: the origin, every heavy vertex crossed,
    and the end vertex.  Between waypoints the path takes its diagonal steps
    first, then goes straight up."""

    waypoints: tuple[Vertex, ...]
    heavy: tuple[bool, ...]

    @property
    def end(self) -> Vertex:
        return self.waypoints[-1]

    def heavy_vertices(self) -> list[Vertex]:
        return [v for v, h in zip(self.waypoints, self.heavy) if h]

    def vertices(self) -> Iterator[Vertex]:
        yield self.waypoints[0]
        for (x0, y0), (x1, y1) in zip(self.waypoints, self.waypoints[1:]):
            x, y = x0, y0
            while y < y1:
                if x < x1:
                    x += 1
                y += 1
                yield (x, y)

    def heavy_marks(self, pw: PercWindow) -> list[int]:
        """Positions, in :meth:`vertices` order, of heavy vertices."""
        return [i for i, v in enumerate(self.vertices()) if is_heavy(pw, v)]

    def to_json(self) -> dict:
        return {"waypoints": [list(v) for v in self.waypoints], "heavy": list(self.heavy)}

    @classmethod
    def from_json(cls, obj: dict) -> "PermittedPath":
        return cls(tuple(tuple(v) for v in obj["waypoints"]), tuple(bool(h) for h in obj["heavy"]))


def find_permitted_path(pw: PercWindow, depth: int | None = None) -> PermittedPath | None:
    """Open permitted path from the origin to row ``depth`` (default: top row).

    Backtracks through stored heavy-row bitsets choosing the leftmost
    admissible column each time, starting from the leftmost reachable column
    on ``depth``.
    """
    depth = pw.height if depth is None else depth
    if not 0 <= depth <= pw.height:
        raise InvalidOperand(f"depth {depth} outside window")
    end = _mask_at(pw, depth)
    if end == 0:
        return None
    x = _lowest_bit(end)
    rows, masks = pw._sweep
    k = bisect.bisect_right(rows, depth) - 1
    end_heavy = rows[k] == depth
    way = [(x, depth)]
    flags = [end_heavy]
    cur_strict = end_heavy
    cur_row = depth
    if end_heavy:
        k -= 1
    while k >= 0 and cur_row > 0:
        h = rows[k]
        g = cur_row - h
        lo = max(0, x - g)
        hi = x - 1 if cur_strict else x
        window = (masks[k] >> lo) & ((1 << (hi - lo + 1)) - 1) if hi >= lo else 0
        if window == 0:
            raise AssertionError("backtracking lost the path; reach sweep is inconsistent")
        x = lo + _lowest_bit(window)
        cur_row = h
        way.append((x, h))
        flags.append(True)
        cur_strict = True
        k -= 1
    way.reverse()
    flags.reverse()
    if way[0] != (0, 0):
        raise AssertionError("path does not start at the origin")
    return PermittedPath(tuple(way), tuple(flags))


def check_path(pw: PercWindow, path: PermittedPath) -> None:
    """Validate a waypoint path; raises MalformedPath with the reason."""
    way = path.waypoints
    if not way or way[0] != (0, 0):
        raise MalformedPath("path must start at the origin")
    end_row = way[-1][1]
    heavy = pw.heavy_rows[pw.heavy_rows <= end_row].tolist()
    wrows = [y for (x, y), h in zip(way, path.heavy) if h]
    if wrows != heavy:
        raise MalformedPath("waypoints must list every heavy row crossed, in order")
    for (x0, y0), (x1, y1) in zip(way, way[1:]):
        if y1 <= y0:
            raise MalformedPath("rows must increase")
        if not 0 <= x1 - x0 <= y1 - y0:
            raise MalformedPath(f"cannot move from {(x0, y0)} to {(x1, y1)}")
        if x1 > pw.width:
            raise MalformedPath("path leaves the window")
    prev_x = None
    for (x, y), h in zip(way, path.heavy):
        if y > 0 and x < 1:
            raise MalformedPath(f"closed axis vertex {(x, y)}")
        if h:
            if not is_open(pw, (x, y)):
                raise MalformedPath(f"closed heavy vertex {(x, y)}")
            if prev_x is not None and x <= prev_x:
                raise MalformedPath("heavy x-coordinates must strictly increase")
            prev_x = x
    # first step leaves the origin diagonally whenever it goes up at all
    if len(way) > 1 and way[1][0] < 1:
        raise MalformedPath("path must leave the origin diagonally")


def is_permitted_vertex_path(pw: PercWindow, vertices: Sequence[Vertex]) -> bool:
    """Check an explicit vertex list edge by edge (independent of waypoints)."""
    if not vertices or tuple(vertices[0]) != (0, 0):
        return False
    seen_x = []
    for i, v in enumerate(vertices):
        if not is_open(pw, v):
            return False
        if i and (v[1] - vertices[i - 1][1], v[0] - vertices[i - 1][0]) not in ((1, 0), (1, 1)):
            return False
        if is_heavy(pw, v):
            if seen_x and v[0] <= seen_x[-1]:
                return False
            seen_x.append(v[0])
    return True


# -- witness extraction -----------------------------------------------------


def extract_witness(path: PermittedPath, pw: PercWindow) -> WitnessSchedule:
    """Weighted-word schedule aligning ``zeta`` and ``psi`` along ``path``.

    For the k-th heavy vertex ``(x, l)`` after the origin, with ``S`` the
    number of zeta entries already erased and ``P`` the length agreed so far:

    * every positive zeta entry strictly between the previous heavy column
      and ``x`` is erased, right to left, so earlier indices stay valid;
    * the weight at ``x`` is then lowered to ``psi[l]``;
    * zeros of ``psi`` are removed at index ``P + 1`` until the two words
      line up at the new common position ``x - S'``.  The number removed is
      ``(l - x + S') - (l_prev - x_prev + S)``, where ``S'`` includes the
      entries just erased.

    Afterwards both words agree on their first ``x_last - S_last`` entries.
    """
    check_path(pw, path)
    zeta = pw.zeta.weights
    psi = pw.psi.weights
    steps: list[WitnessStep] = []
    erased = 0
    agreed = 0
    x_prev, l_prev = 0, 0
    for x, l in path.heavy_vertices()[1:]:
        zx, pl = zeta[x - 1], psi[l - 1]
        mids = [j for j in range(x_prev + 1, x) if zeta[j - 1]]
        for j in reversed(mids):
            steps.append(WitnessStep(FIRST, DECREMENT, j - erased, zeta[j - 1]))
        new_erased = erased + len(mids)
        if zx > pl:
            steps.append(WitnessStep(FIRST, DECREMENT, x - new_erased, zx - pl))
        zeros = (l - x + new_erased) - (l_prev - x_prev + erased)
        if zeros < 0:
            raise MalformedPath("path moves right faster than it climbs")
        if zeros:
            steps.append(WitnessStep(SECOND, DELETE_ZERO, agreed + 1, zeros))
        erased = new_erased
        agreed = x - erased
        x_prev, l_prev = x, l
    return WitnessSchedule(tuple(steps), agreed)


# -- bound checks -----------------------------------------------------------


def c1_bound(k: int, L: int, M: int, span: int) -> int:
    """``max(sum_{r<k} (L^r + 1) floor(span / M^r), 1)``."""
    return max(sum((L**r + 1) * (span // M**r) for r in range(1, k)), 1)


def _tail_sum(k: int, L: int, M: int, span: int) -> int:
    return sum((L**r + 1) * (span // M**r) for r in range(1, k))


def looks_like_shifted_hierarchy(zeta: WeightedWord, L: int, k: int) -> bool:
    """Entries off multiples of ``L^k`` equal the ``L``-adic valuation; entries
    on multiples of ``L^k`` are at least ``k``."""
    n = len(zeta)
    if n == 0:
        return True
    z = zeta.capped_array()
    v = valuation_array(L, 1, n)
    on = (np.arange(1, n + 1) % L**k) == 0
    return bool(np.all(z[~on] == v[~on]) and np.all(z[on] >= k))


@dataclass(frozen=True)
class C1Report:
    applicable: bool
    reason: str = ""
    k: int = 0
    i_k: int | None = None
    segments: tuple = ()
    bound: int = 0
    left_margin: int = 0
    right_margin: int = 0
    single: bool = False

    @property
    def ok(self) -> bool:
        return self.applicable and self.single and self.left_margin >= 0 and self.right_margin >= 0

    def to_json(self) -> dict:
        d = dict(self.__dict__)
        d["segments"] = [list(s) for s in self.segments]
        d["ok"] = self.ok
        return d


def check_c1_bounds(pw: PercWindow, k: int, L: int, M: int | None = None) -> C1Report:
    """Reach set on row ``i_k - 1`` is one segment whose ends lie within the
    bound ``c1_bound(k, L, M, i_k - 1)`` of ``1`` and of ``i_k``."""
    M = 3 * (L + 1) if M is None else M
    if M < 3 * (L + 1):
        return C1Report(False, f"M={M} below 3(L+1)", k)
    spacing = is_M_spaced(pw.psi, M, level=k)
    if not spacing:
        return C1Report(False, f"psi not spaced at level {k}: {spacing.violation}", k)
    ik = first_index_at_least(pw.psi, k)
    if ik is None:
        return C1Report(False, f"no weight >= {k} in window", k)
    if not looks_like_shifted_hierarchy(pw.zeta, L, k):
        return C1Report(False, "zeta is not a shifted hierarchical window", k, ik)
    if pw.width < ik:
        return C1Report(False, "window narrower than i_k", k, ik)
    rs = reach_at(pw, ik - 1)
    b = c1_bound(k, L, M, ik - 1)
    if rs.empty:
        return C1Report(True, "empty reach set", k, ik, (), b, -1, -1, False)
    return C1Report(True, "", k, ik, rs.intervals, b, b - rs.left, rs.right - (ik - b), rs.single)


@dataclass(frozen=True)
class STReport:
    applicable: bool
    reason: str = ""
    segment: tuple = ()
    reached: tuple = ()
    single: bool = False
    left_margin: int = 0
    right_margin: int = 0
    size_margin: int = 0
    spacing_ok: bool = True

    @property
    def ok(self) -> bool:
        return self.applicable and self.single and min(self.left_margin, self.right_margin, self.size_margin) >= 0

    def to_json(self) -> dict:
        d = dict(self.__dict__)
        d["ok"] = self.ok
        return d


def check_st_bounds(
    I1: tuple[int, int], pw: PercWindow, j1: int, j2: int, *, L: int, M: int | None = None
) -> STReport:
    """Grow the segment ``I1`` on row ``j1 - 1`` to row ``j2 - 1`` and compare
    the result with the three linear bounds on its ends and size."""
    M = 3 * (L + 1) if M is None else M
    lo1, hi1 = I1
    if not 1 <= lo1 <= hi1:
        return STReport(False, "segment must lie in x >= 1")
    if not 1 <= j1 < j2 <= pw.height + 1:
        return STReport(False, "rows outside window")
    k = pw.weight_row(j1)
    if k < 1:
        return STReport(False, "psi[j1] must be positive")
    nxt = next((i for i in range(j1 + 1, pw.height + 1) if pw.weight_row(i) >= k), None)
    if nxt != j2:
        return STReport(False, f"next index with weight >= {k} is {nxt}, not {j2}")
    if hi1 - lo1 + 1 < L**k:
        return STReport(False, "segment shorter than L^k")
    spacing_ok = bool(is_M_spaced(pw.psi, M, level=0))
    if pw.width < hi1:
        return STReport(False, "segment outside window")
    I2 = reach_from(pw, j1 - 1, [I1], j2 - 1)
    gap = j2 - j1 - 1
    extra = L**k + _tail_sum(k, L, M, gap)
    if I2.empty:
        return STReport(True, "empty", I1, (), False, -1, -1, -1, spacing_ok)
    size1 = hi1 - lo1 + 1
    return STReport(
        True,
        "",
        I1,
        I2.intervals,
        I2.single,
        (lo1 + extra) - I2.left,
        I2.right - (hi1 + gap - extra),
        I2.size - (size1 + gap - 2 * extra),
        spacing_ok,
    )


def origin_cluster_slab(zeta: WeightedWord, psi: WeightedWord, top: int) -> list[int]:
    """Open cluster of the origin (plain oriented percolation, no permitted
    constraint) as one bitset per row ``0..top``."""
    pw = PercWindow(zeta, psi)
    W = pw.width
    rows = [1]
    cur = 1
    for y in range(1, top + 1):
        cur = (cur | (cur << 1)) & pw.open_mask(pw.weight_row(y)) & pw.column_mask
        rows.append(cur)
    return rows


def check_shift_invariance(psi: WeightedWord, k: int, m: int, m2: int, *, L: int, width: int | None = None) -> bool:
    """Origin cluster within rows ``0..i_k`` is unchanged when the hierarchical
    x-labels are shifted by ``m L^w`` or ``m2 L^w`` (``w = psi[i_k]``)."""
    ik = first_index_at_least(psi, k) if k >= 1 else 1
    if ik is None:
        raise InvalidOperand(f"no weight >= {k} in window")
    w = psi.weights[ik - 1]
    width = ik + 1 if width is None else width
    base = L**w

    def labels(shift: int) -> WeightedWord:
        return WeightedWord(tuple(valuation_array(L, shift + 1, width).tolist()))

    a = origin_cluster_slab(labels(m * base), psi, ik)
    b = origin_cluster_slab(labels(m2 * base), psi, ik)
    return a == b


def check_buraco(a: int, k: int, L_tilde: int, M: int) -> bool:
    """Exact test of ``a >= L~^k + 2a sum_{j<k} (L~/M)^j``."""
    if M < 3 * L_tilde or k < 1 or a < M**k:
        raise InvalidOperand("need M >= 3 L~, k >= 1 and a >= M^k")
    rhs = Fraction(L_tilde**k) + 2 * a * sum(Fraction(L_tilde, M) ** j for j in range(1, k))
    return Fraction(a) >= rhs


__all__ = [
    "PercWindow",
    "ReachSet",
    "PermittedPath",
    "MalformedPath",
    "is_open",
    "is_heavy",
    "reach_rows",
    "reach_at",
    "reach_from",
    "find_permitted_path",
    "check_path",
    "is_permitted_vertex_path",
    "extract_witness",
    "c1_bound",
    "check_c1_bounds",
    "check_st_bounds",
    "check_shift_invariance",
    "origin_cluster_slab",
    "check_buraco",
    "C1Report",
    "STReport",
]
