"""Weighted words: run-length encoding of binary windows, weighted
annihilation operators, spacing predicates and witness translation.

A weighted word is a sequence of nonnegative integers in which every positive
entry is followed by a zero.  A positive entry ``k`` stands for a run of ``k``
ones and a zero entry for a single 0; the 0 that terminates a run is an entry
of its own.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .seqcore import (
    DECREMENT,
    DELETE_ONE,
    DELETE_ZERO,
    FIRST,
    SECOND,
    BinaryWindow,
    InvalidOperand,
    ReplayError,
    WitnessSchedule,
    WitnessStep,
)

INT64_CAP = 2**62


class StructureError(ValueError):
    """A word violates the rule that a positive entry is followed by a zero."""


class BoundaryError(InvalidOperand):
    """An operator needs the entry just past the end of the window."""


def _first_constraint_violation(weights: Sequence[int]) -> int | None:
    for i in range(len(weights) - 1):
        if weights[i] and weights[i + 1]:
            return i + 1
    return None


@dataclass(frozen=True)
class WeightedWord:
    """Window of a weighted word; ``weights`` hold arbitrary-precision ints."""

    weights: tuple[int, ...]
    last_run_complete: bool = True

    def __post_init__(self):
        w = tuple(int(x) for x in self.weights) if not isinstance(self.weights, tuple) else self.weights
        object.__setattr__(self, "weights", w)
        if len(w) < 4096:
            if w and min(w) < 0:
                raise StructureError("weights must be nonnegative")
            bad = _first_constraint_violation(w)
        else:
            try:
                arr = self.capped_array()
            except OverflowError:
                raise StructureError("weights must be nonnegative") from None
            if arr.min() < 0:
                raise StructureError("weights must be nonnegative")
            nz = arr != 0
            hit = np.flatnonzero(nz[:-1] & nz[1:])
            bad = int(hit[0]) + 1 if hit.size else None
        if bad is not None:
            raise StructureError(f"positive entry at {bad} is followed by a positive entry")

    @classmethod
    def parse(cls, text: str) -> "WeightedWord":
        text = text.strip()
        return cls(tuple(int(t) for t in text.split(",") if t.strip()) if text else ())

    @classmethod
    def from_array(cls, arr: np.ndarray, last_run_complete: bool = True) -> "WeightedWord":
        """Build from an int64 array, validating on the array itself."""
        arr = np.ascontiguousarray(arr, dtype=np.int64)
        if arr.size and arr.min() < 0:
            raise StructureError("weights must be nonnegative")
        nz = arr != 0
        hit = np.flatnonzero(nz[:-1] & nz[1:])
        if hit.size:
            raise StructureError(f"positive entry at {int(hit[0]) + 1} is followed by a positive entry")
        out = cls._trusted(tuple(arr.tolist()), last_run_complete)
        arr.setflags(write=False)
        out.__dict__["_capped"] = arr
        return out

    @property
    def length(self) -> int:
        return len(self.weights)

    def __len__(self) -> int:
        return len(self.weights)

    def at(self, i: int) -> int:
        """Entry at 1-based index ``i``."""
        if not 1 <= i <= len(self.weights):
            raise InvalidOperand(f"index {i} outside word of length {len(self.weights)}")
        return self.weights[i - 1]

    @classmethod
    def _trusted(cls, weights: tuple[int, ...], complete: bool = True) -> "WeightedWord":
        """Build without validation; for slices of already valid words."""
        obj = object.__new__(cls)
        object.__setattr__(obj, "weights", weights)
        object.__setattr__(obj, "last_run_complete", complete)
        return obj

    def prefix(self, n: int) -> "WeightedWord":
        out = WeightedWord._trusted(self.weights[:n], True if n < len(self.weights) else self.last_run_complete)
        if "_capped" in self.__dict__:
            out.__dict__["_capped"] = self.__dict__["_capped"][:n]
        return out

    def capped_array(self, cap: int = INT64_CAP) -> np.ndarray:
        """int64 view with entries clipped at ``cap`` (order-preserving below the cap).

        The default-cap array is cached and read-only.
        """
        if cap == INT64_CAP and "_capped" in self.__dict__:
            return self.__dict__["_capped"]
        try:
            arr = np.asarray(self.weights, dtype=np.int64)
        except OverflowError:
            arr = np.fromiter((min(w, cap) for w in self.weights), dtype=np.int64, count=len(self.weights))
        if arr.size and arr.max() > cap:
            arr = np.minimum(arr, cap)
        if cap == INT64_CAP:
            arr.setflags(write=False)
            self.__dict__["_capped"] = arr
        return arr

    def binary_length(self) -> int:
        return sum(w if w else 1 for w in self.weights)

    def to_json(self) -> dict:
        return {"weights": list(self.weights), "complete": self.last_run_complete}

    @classmethod
    def from_json(cls, obj: dict) -> "WeightedWord":
        return cls(tuple(int(x) for x in obj["weights"]), bool(obj.get("complete", True)))

    def __repr__(self) -> str:
        body = ",".join(map(str, self.weights[:24])) + ("..." if len(self) > 24 else "")
        return f"WeightedWord(({body}), length={len(self)})"


def encode(w: BinaryWindow) -> WeightedWord:
    """Run-length encode a binary window.

    A trailing run of ones that reaches the end of the window has unknown
    length; it is left out and the word is flagged incomplete.
    """
    a = w.as_array().astype(np.int8)
    n = a.size
    if n == 0:
        return WeightedWord(())
    d = np.diff(np.concatenate(([0], a, [0])))
    starts = np.flatnonzero(d == 1)
    ends = np.flatnonzero(d == -1)  # exclusive; index of the terminating zero
    complete = not (ends.size and ends[-1] == n)
    if not complete:
        starts, ends = starts[:-1], ends[:-1]
    zeros = np.flatnonzero(a == 0)
    keys = np.concatenate((2 * ends, 2 * zeros + 1))
    vals = np.concatenate((ends - starts, np.zeros(zeros.size, dtype=np.int64)))
    order = np.argsort(keys, kind="stable")
    return WeightedWord.from_array(vals[order], complete)


def decode(v: WeightedWord, max_bits: int | None = None) -> BinaryWindow:
    """Inverse of :func:`encode`; optionally stop after ``max_bits`` symbols."""
    out = bytearray()
    limit = max_bits if max_bits is not None else None
    if limit is None and all(x < INT64_CAP for x in v.weights):
        arr = np.asarray(v.weights, dtype=np.int64)
        bits = np.repeat((arr > 0).astype(np.uint8), np.where(arr > 0, arr, 1))
        return BinaryWindow(bits.tobytes())
    for x in v.weights:
        if limit is not None and len(out) >= limit:
            break
        if x == 0:
            out.append(0)
        else:
            k = x if limit is None else min(x, limit - len(out))
            out.extend(b"\x01" * k)
    if limit is not None:
        del out[limit:]
    return BinaryWindow(bytes(out))


def _check(v: WeightedWord, i: int) -> None:
    if not 1 <= i <= len(v):
        raise InvalidOperand(f"index {i} outside word of length {len(v)}")


def ww_delete_zero(v: WeightedWord, i: int) -> WeightedWord:
    """Weighted counterpart of deleting a 0.

    Removing a zero that separates two runs glues the runs together, so the
    two flanking weights are replaced by their sum.
    """
    _check(v, i)
    w = v.weights
    if w[i - 1] != 0:
        return v
    if i == 1 or w[i - 2] == 0:
        return WeightedWord(w[: i - 1] + w[i:], v.last_run_complete)
    if i == len(w):
        raise BoundaryError(f"cannot tell plain removal from a merge at the window end (index {i})")
    if w[i] == 0:
        return WeightedWord(w[: i - 1] + w[i:], v.last_run_complete)
    return WeightedWord(w[: i - 2] + (w[i - 2] + w[i],) + w[i + 1 :], v.last_run_complete)


def ww_delete_one(v: WeightedWord, i: int) -> WeightedWord:
    """Weighted counterpart of deleting a 1: shorten the run at ``i``."""
    _check(v, i)
    w = v.weights
    if w[i - 1] == 0:
        return v
    if w[i - 1] == 1:
        return WeightedWord(w[: i - 1] + w[i:], v.last_run_complete)
    return WeightedWord(w[: i - 1] + (w[i - 1] - 1,) + w[i:], v.last_run_complete)


def first_index_at_least(v: WeightedWord, k: int) -> int | None:
    """Least index with weight >= k, or None when no such index is in the window.

    None never means that the index does not exist; a window cannot rule that out.
    """
    if k < 1:
        raise InvalidOperand("k must be positive")
    if len(v) > 4096:
        hit = np.flatnonzero(v.capped_array() >= k)
        return int(hit[0]) + 1 if hit.size else None
    for idx, x in enumerate(v.weights, start=1):
        if x >= k:
            return idx
    return None


@dataclass(frozen=True)
class SpacingReport:
    """Outcome of :func:`is_M_spaced`.

    ``violation`` is ``("pair", i, j)`` for two positive entries that are too
    close, or ``("level", j, i_j)`` when the first weight >= j comes too early.
    """

    ok: bool
    violation: tuple | None = None

    def __bool__(self) -> bool:
        return self.ok


def _nonzero(v) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(v, WeightedWord):
        arr = v.capped_array()
    else:
        arr = np.asarray([min(int(x), INT64_CAP) for x in v], dtype=np.int64)
    pos = np.flatnonzero(arr) + 1
    return pos, arr[pos - 1]


def is_M_spaced(v, M: int, level: int | None = None) -> SpacingReport:
    """Check the spacing conditions of an M-spaced word inside the window.

    Pairwise condition: positive entries ``i < j`` satisfy
    ``j - i >= M ** min(w_i, w_j)``.  It holds exactly when, for every
    threshold ``t``, consecutive positions of weight >= t are at least
    ``M ** t`` apart, which is what is checked here.

    First-occurrence condition: the first index of weight >= j is at least
    ``M ** j``, for ``j <= level`` (or every visible ``j`` if level is None).
    Accepts a WeightedWord or any integer sequence, so that words breaking
    the run constraint can still be diagnosed.
    """
    if M < 2:
        raise InvalidOperand("M must be at least 2")
    pos, vals = _nonzero(v)
    worst: tuple | None = None
    top = int(vals.max()) if vals.size else 0
    for t in range(1, top + 1):
        sel = pos[vals >= t]
        if sel.size < 2:
            continue
        need = M**t
        if need > INT64_CAP:
            bad = np.arange(sel.size - 1)
        else:
            bad = np.flatnonzero(np.diff(sel) < need)
        if bad.size:
            cand = (int(sel[bad[0] + 1]), int(sel[bad[0]]))
            if worst is None or cand < worst:
                worst = cand
    if worst is not None:
        return SpacingReport(False, ("pair", worst[1], worst[0]))
    upto = top if level is None else min(level, top)
    for j in range(1, upto + 1):
        first = int(pos[np.argmax(vals >= j)])
        if first < M**j:
            return SpacingReport(False, ("level", j, first))
    return SpacingReport(True)


def shift(v: WeightedWord, m: int) -> WeightedWord:
    """Drop the first ``m`` entries."""
    if m < 0 or m >= len(v):
        raise InvalidOperand(f"shift {m} not below length {len(v)}")
    out = WeightedWord._trusted(v.weights[m:], v.last_run_complete)
    if "_capped" in v.__dict__:
        out.__dict__["_capped"] = v.__dict__["_capped"][m:]
    return out


# -- schedules on weighted words -------------------------------------------


def _ww_delete_zero_run(w: list[int], i: int, count: int, k: int) -> int:
    """Apply delete-zero ``count`` times at index ``i`` of the list ``w``.

    Returns how many applications acted; each one removes exactly one binary 0.
    """
    done = 0
    while count > 0:
        if i > len(w):
            raise ReplayError(k, f"index {i} beyond current length {len(w)}")
        if w[i - 1] != 0:
            break
        window = w[i - 1 : i + count]
        if not any(window):
            run = len(window)
        else:
            run = int(np.flatnonzero(np.asarray(window, dtype=object) != 0)[0])
        take = min(count, run) if (i == 1 or w[i - 2] == 0) else min(count, run - 1)
        if take > 0:
            del w[i - 1 : i - 1 + take]
        else:
            # a lone zero between a positive left neighbour and entry i + 1
            if i == len(w):
                raise ReplayError(k, f"merge at window end (index {i})")
            w[i - 2 : i + 1] = [w[i - 2] + w[i]]
            take = 1
        count -= take
        done += take
    return done


def _ww_decrement(w: list[int], i: int, count: int, k: int) -> int:
    """Apply decrement-weight ``count`` times at ``i``; returns how many acted."""
    if i > len(w):
        raise ReplayError(k, f"index {i} beyond current length {len(w)}")
    x = w[i - 1]
    if count < x:
        w[i - 1] = x - count
        return count
    if x:
        del w[i - 1]
    return x


def apply_ww_schedule(
    zeta: WeightedWord, psi: WeightedWord, s: WitnessSchedule
) -> tuple[WeightedWord, WeightedWord]:
    """Replay a weighted schedule: decrements act on ``zeta``, zero deletions on ``psi``."""
    a = list(zeta.weights)
    b = list(psi.weights)
    for k, step in enumerate(s.steps):
        if step.op == DECREMENT:
            _ww_decrement(a, step.index, step.count, k)
        elif step.op == DELETE_ZERO:
            _ww_delete_zero_run(b, step.index, step.count, k)
        else:
            raise ReplayError(k, f"{step.op} is not a weighted operator")
    return WeightedWord(tuple(a), zeta.last_run_complete), WeightedWord(tuple(b), psi.last_run_complete)


def ww_replay_agrees(zeta: WeightedWord, psi: WeightedWord, s: WitnessSchedule) -> bool:
    z, p = apply_ww_schedule(zeta, psi, s)
    t = s.target_length
    return len(z) >= t and len(p) >= t and z.weights[:t] == p.weights[:t]


def _binary_offset(w: list[int], i: int) -> int:
    return 1 + sum(x if x else 1 for x in w[: i - 1])


def translate_witness(s: WitnessSchedule, zeta: WeightedWord, psi: WeightedWord) -> WitnessSchedule:
    """Turn a weighted schedule for ``(zeta, psi)`` into a binary schedule for
    ``(decode(zeta), decode(psi))``.

    Each counted decrement becomes a counted delete-one at the first bit of
    the run and each counted weighted delete-zero becomes a counted binary
    delete-zero at the bit of that zero.  The certified binary prefix is the
    expansion of the certified weighted prefix.
    """
    a = list(zeta.weights)
    b = list(psi.weights)
    out: list[WitnessStep] = []
    for k, step in enumerate(s.steps):
        if step.op == DECREMENT:
            if step.index > len(a):
                raise ReplayError(k, "index beyond first word")
            off = _binary_offset(a, step.index)
            acted = _ww_decrement(a, step.index, step.count, k)
            if acted:
                out.append(WitnessStep(FIRST, DELETE_ONE, off, acted))
        elif step.op == DELETE_ZERO:
            if step.index > len(b):
                raise ReplayError(k, "index beyond second word")
            off = _binary_offset(b, step.index)
            acted = _ww_delete_zero_run(b, step.index, step.count, k)
            if acted:
                out.append(WitnessStep(SECOND, DELETE_ZERO, off, acted))
        else:
            raise ReplayError(k, f"{step.op} is not a weighted operator")
    target_bits = sum(x if x else 1 for x in a[: s.target_length])
    return WitnessSchedule(tuple(out), target_bits)


__all__ = [
    "WeightedWord",
    "StructureError",
    "BoundaryError",
    "SpacingReport",
    "encode",
    "decode",
    "ww_delete_zero",
    "ww_delete_one",
    "first_index_at_least",
    "is_M_spaced",
    "shift",
    "apply_ww_schedule",
    "ww_replay_agrees",
    "translate_witness",
]
