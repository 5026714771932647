"""Binary windows, annihilation operators, Bernoulli sampling and a
dynamic-programming oracle for prefix compatibility.

Two binary windows ``eta`` and ``xi`` are *compatible to depth t* when some
ones can be deleted from ``eta`` and some zeros from ``xi`` so that the two
results agree on their first ``t`` symbols.  All indices are 1-based and are
interpreted against the current (already mutated) state of a window.
"""
from __future__ import annotations

import base64
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

FIRST = "first"
SECOND = "second"
DELETE_ONE = "delete-one"
DELETE_ZERO = "delete-zero"
DECREMENT = "decrement-weight"

_SIDE_OPS = {DELETE_ONE: FIRST, DECREMENT: FIRST, DELETE_ZERO: SECOND}


class InvalidOperand(ValueError):
    """An index or parameter falls outside the admissible range."""


class ReplayError(ValueError):
    """A schedule step could not be applied."""

    def __init__(self, step_number: int, message: str):
        super().__init__(f"step {step_number}: {message}")
        self.step_number = step_number


@dataclass(frozen=True)
class BinaryWindow:
    """Finite prefix of a 0/1 sequence, stored as one byte per symbol."""

    bits: bytes

    def __post_init__(self):
        if not isinstance(self.bits, bytes):
            object.__setattr__(self, "bits", bytes(self.bits))
        if self.bits.translate(None, b"\x00\x01"):
            raise InvalidOperand("bits must be 0 or 1")

    @classmethod
    def from_iter(cls, values: Iterable[int]) -> "BinaryWindow":
        return cls(bytes(int(v) for v in values))

    @classmethod
    def from_array(cls, arr) -> "BinaryWindow":
        return cls(np.asarray(arr, dtype=np.uint8).tobytes())

    @classmethod
    def from_string(cls, text: str) -> "BinaryWindow":
        text = "".join(text.split())
        if set(text) - {"0", "1"}:
            raise InvalidOperand("bit strings may only contain '0' and '1'")
        return cls(text.encode("ascii").translate(bytes.maketrans(b"01", b"\x00\x01")))

    @property
    def length(self) -> int:
        return len(self.bits)

    def __len__(self) -> int:
        return len(self.bits)

    def bit(self, i: int) -> int:
        """Symbol at 1-based position ``i``."""
        if not 1 <= i <= len(self.bits):
            raise InvalidOperand(f"index {i} outside window of length {len(self.bits)}")
        return self.bits[i - 1]

    def as_array(self) -> np.ndarray:
        return np.frombuffer(self.bits, dtype=np.uint8)

    def prefix(self, n: int) -> "BinaryWindow":
        return BinaryWindow(self.bits[:n])

    def zeros(self) -> np.ndarray:
        """1-based positions of zeros."""
        return np.flatnonzero(self.as_array() == 0) + 1

    def to_string(self) -> str:
        return self.bits.translate(bytes.maketrans(b"\x00\x01", b"01")).decode("ascii")

    def to_json(self) -> dict:
        packed = np.packbits(self.as_array()).tobytes()
        return {"length": len(self.bits), "base64": base64.b64encode(packed).decode("ascii")}

    @classmethod
    def from_json(cls, obj: dict) -> "BinaryWindow":
        raw = np.frombuffer(base64.b64decode(obj["base64"]), dtype=np.uint8)
        return cls.from_array(np.unpackbits(raw)[: int(obj["length"])])

    def __repr__(self) -> str:
        body = self.to_string() if len(self) <= 64 else self.to_string()[:61] + "..."
        return f"BinaryWindow('{body}', length={len(self)})"


def _check_index(n: int, i: int) -> None:
    if not 1 <= i <= n:
        raise InvalidOperand(f"index {i} outside window of length {n}")


def delete_zero(w: BinaryWindow, i: int) -> BinaryWindow:
    """Remove the ``i``-th symbol if it is a 0; identity on a 1."""
    _check_index(len(w), i)
    if w.bits[i - 1] != 0:
        return w
    return BinaryWindow(w.bits[: i - 1] + w.bits[i:])


def delete_one(w: BinaryWindow, i: int) -> BinaryWindow:
    """Remove the ``i``-th symbol if it is a 1; identity on a 0."""
    _check_index(len(w), i)
    if w.bits[i - 1] != 1:
        return w
    return BinaryWindow(w.bits[: i - 1] + w.bits[i:])


def sample_uniforms(n: int, seed: int) -> np.ndarray:
    """Uniforms driving a window; thresholding them couples different ``p``."""
    return np.random.default_rng(seed).random(n)


def threshold(u: np.ndarray, p: float) -> BinaryWindow:
    if not 0.0 <= p <= 1.0:
        raise InvalidOperand(f"p={p} is not a probability")
    return BinaryWindow((u < p).astype(np.uint8).tobytes())


def sample_bernoulli(p: float, n: int, seed: int) -> BinaryWindow:
    """I.i.d. window with P(bit = 1) = p, reproducible from ``seed``."""
    if not 0.0 <= p <= 1.0:
        raise InvalidOperand(f"p={p} is not a probability")
    return threshold(sample_uniforms(n, seed), p)


@dataclass(frozen=True)
class WitnessStep:
    """Apply ``op`` ``count`` times at the current ``index`` of ``side``."""

    side: str
    op: str
    index: int
    count: int = 1

    def __post_init__(self):
        if self.op not in _SIDE_OPS:
            raise InvalidOperand(f"unknown operator {self.op!r}")
        if _SIDE_OPS[self.op] != self.side:
            raise InvalidOperand(f"{self.op} applies to the {_SIDE_OPS[self.op]} sequence only")
        if self.index < 1 or self.count < 1:
            raise InvalidOperand("index and count must be positive")

    def as_list(self) -> list:
        return [self.side, self.op, self.index, self.count]


@dataclass(frozen=True)
class WitnessSchedule:
    steps: tuple[WitnessStep, ...]
    target_length: int

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        if self.target_length < 0:
            raise InvalidOperand("target_length must be nonnegative")

    def __len__(self) -> int:
        return len(self.steps)

    def total_operations(self) -> int:
        return sum(s.count for s in self.steps)

    def to_json(self) -> dict:
        return {"target_length": self.target_length, "steps": [s.as_list() for s in self.steps]}

    @classmethod
    def from_json(cls, obj: dict) -> "WitnessSchedule":
        steps = tuple(WitnessStep(str(a), str(b), int(c), int(d)) for a, b, c, d in obj["steps"])
        return cls(steps, int(obj["target_length"]))


def compress_steps(steps: Iterable[WitnessStep]) -> list[WitnessStep]:
    """Merge consecutive identical (side, op, index) steps into one counted step."""
    out: list[WitnessStep] = []
    for s in steps:
        if out and (out[-1].side, out[-1].op, out[-1].index) == (s.side, s.op, s.index):
            out[-1] = WitnessStep(s.side, s.op, s.index, out[-1].count + s.count)
        else:
            out.append(s)
    return out


def _delete_run(buf: bytearray, index: int, symbol: int, count: int, strict: bool, k: int) -> None:
    """Apply a counted deletion of ``symbol`` at ``index`` to ``buf`` in place."""
    n = len(buf)
    if index > n:
        if strict:
            raise ReplayError(k, f"index {index} beyond current length {n}")
        return
    start = index - 1
    stop = min(n, start + count)
    other = b"\x01" if symbol == 0 else b"\x00"
    hit = buf.find(other, start, stop)
    end = stop if hit < 0 else hit
    if strict and hit < 0 and start + count > n:
        raise ReplayError(k, f"repeated application at index {index} runs past the window")
    del buf[start:end]


def apply_schedule(
    eta: BinaryWindow, xi: BinaryWindow, s: WitnessSchedule, *, strict: bool = True
) -> tuple[BinaryWindow, BinaryWindow]:
    """Replay ``s`` on ``(eta, xi)``.

    With ``strict=False`` applications that address positions beyond the
    current window are skipped; this is how a schedule for long sequences is
    replayed on truncated prefixes.
    """
    a = bytearray(eta.bits)
    b = bytearray(xi.bits)
    for k, step in enumerate(s.steps):
        if step.op == DELETE_ONE:
            _delete_run(a, step.index, 1, step.count, strict, k)
        elif step.op == DELETE_ZERO:
            _delete_run(b, step.index, 0, step.count, strict, k)
        else:
            raise ReplayError(k, f"{step.op} is not a binary operator")
    return BinaryWindow(bytes(a)), BinaryWindow(bytes(b))


def common_prefix_length(a: BinaryWindow | bytes, b: BinaryWindow | bytes) -> int:
    x = a.bits if isinstance(a, BinaryWindow) else a
    y = b.bits if isinstance(b, BinaryWindow) else b
    n = min(len(x), len(y))
    if n == 0:
        return 0
    diff = np.flatnonzero(np.frombuffer(x[:n], np.uint8) != np.frombuffer(y[:n], np.uint8))
    return int(diff[0]) if diff.size else n


def _segmented_suffix_max(values: np.ndarray, starts: np.ndarray) -> np.ndarray:
    """Suffix maximum restarted at every index flagged in ``starts``.

    Scanning right to left, a flagged index opens a new segment.  Values are
    nonnegative and bounded by ``len(values)``, so a segment offset keeps the
    running maximum from leaking across segments.
    """
    rev = values[::-1]
    seg = np.cumsum(starts[::-1])
    big = np.int64(len(values) + 1)
    shifted = rev.astype(np.int64) + seg * big
    return (np.maximum.accumulate(shifted) - seg * big)[::-1]


def prefix_compatible_oracle(
    eta: BinaryWindow, xi: BinaryWindow, target: int
) -> WitnessSchedule | None:
    """Schedule certifying a common prefix of length ``target``, or None.

    ``F[i, j]`` is the largest number of further common symbols obtainable
    after consuming ``i`` symbols of ``eta`` and ``j`` of ``xi``.  Equal
    symbols are matched at once (an exchange argument shows this never hurts;
    the test-suite confirms it by exhaustive enumeration), a 0 against a 1 is
    a dead end, and a 1 against a 0 branches into deleting either of them.
    """
    n, m = len(eta), len(xi)
    if target < 0 or target > min(n, m):
        raise InvalidOperand(f"target {target} exceeds window lengths ({n}, {m})")
    if target == 0:
        return WitnessSchedule((), 0)
    a = eta.as_array()
    b = xi.as_array()
    F = np.zeros((n + 1, m + 1), dtype=np.int32)
    b_is_one = b == 1
    starts = np.concatenate([b_is_one, [True]])
    for i in range(n - 1, -1, -1):
        below = F[i + 1]
        row = F[i]
        if a[i] == 0:
            # matches the zeros of xi, dead end on its ones
            row[:m] = np.where(b_is_one, 0, 1 + below[1:])
        else:
            base = np.empty(m + 1, dtype=np.int64)
            base[:m] = np.where(b_is_one, 1 + below[1:], below[:m])
            base[m] = 0
            row[:] = _segmented_suffix_max(base, starts)
    if F[0, 0] < target:
        return None
    steps: list[WitnessStep] = []
    i = j = emitted = 0
    while emitted < target:
        if a[i] == b[j]:
            i += 1
            j += 1
            emitted += 1
        elif F[i + 1, j] >= F[i, j]:
            steps.append(WitnessStep(FIRST, DELETE_ONE, emitted + 1))
            i += 1
        else:
            steps.append(WitnessStep(SECOND, DELETE_ZERO, emitted + 1))
            j += 1
    return WitnessSchedule(tuple(compress_steps(steps)), target)


def replay_agrees(eta: BinaryWindow, xi: BinaryWindow, s: WitnessSchedule, *, strict: bool = True) -> bool:
    e2, x2 = apply_schedule(eta, xi, s, strict=strict)
    if min(len(e2), len(x2)) < s.target_length:
        return False
    return e2.bits[: s.target_length] == x2.bits[: s.target_length]


__all__: Sequence[str] = (
    "BinaryWindow",
    "WitnessStep",
    "WitnessSchedule",
    "InvalidOperand",
    "ReplayError",
    "delete_zero",
    "delete_one",
    "sample_bernoulli",
    "sample_uniforms",
    "threshold",
    "prefix_compatible_oracle",
    "apply_schedule",
    "replay_agrees",
    "common_prefix_length",
    "compress_steps",
)
