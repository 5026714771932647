"""Multiscale grouping of the ones of a binary window.

Points of ``Gamma`` (positions holding a 1) start as unit-mass singletons.
At pass ``k`` (``k = 0, 1, ...``) the current clusters of mass ``>= k+1`` are
scanned left to right; a maximal run of two or more of them with successive
gaps ``< M^(k+1)`` is replaced by one cluster of level ``k+1`` whose members
are all points of ``Gamma`` inside the run's span.  The merged mass is the
sum of the constituent masses minus ``k`` per extra constituent.  Clusters of
smaller mass caught inside the span are absorbed as dust.

A finite window cannot see points beyond its right end, so clusters near
that end are marked *provisional*; see :func:`build_forest`.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .runword import WeightedWord, encode
from .seqcore import DELETE_ZERO, SECOND, BinaryWindow, InvalidOperand, WitnessStep

NOT_DETERMINED = "not-determined"


@dataclass
class ClusterNode:
    id: int
    level: int
    mass: int
    alpha: int
    omega: int
    members: np.ndarray
    constituents: tuple[int, ...] = ()  # empty for level <= 1
    dust: tuple[int, ...] = ()
    provisional: bool = False

    @property
    def span(self) -> tuple[int, int]:
        return (self.alpha, self.omega)

    @property
    def diameter(self) -> int:
        return self.omega - self.alpha

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "level": self.level,
            "mass": self.mass,
            "span": [self.alpha, self.omega],
            "size": int(self.members.size),
            "constituents": list(self.constituents),
            "provisional": self.provisional,
        }


@dataclass
class ClusterForest:
    gamma_points: np.ndarray
    nodes: list[ClusterNode]
    levels: list[tuple[int, ...]]
    final_partition: tuple[int, ...]
    M: int
    window_length: int
    _owner: dict = field(default_factory=dict, repr=False)

    def node(self, i: int) -> ClusterNode:
        return self.nodes[i]

    def final(self) -> list[ClusterNode]:
        return [self.nodes[i] for i in self.final_partition]

    def stable(self) -> list[ClusterNode]:
        return [c for c in self.final() if not c.provisional]

    def provisional_from(self) -> int | None:
        """Left end of the first provisional final cluster, if any."""
        for c in self.final():
            if c.provisional:
                return c.alpha
        return None

    def stable_length(self) -> int:
        """Length of the prefix of the window whose grouping is certified."""
        a = self.provisional_from()
        return self.window_length if a is None else a - 1

    def final_cluster_of(self, x: int) -> ClusterNode:
        if x not in self._owner:
            raise InvalidOperand(f"{x} is not a point of the window's Gamma")
        return self.nodes[self._owner[x]]

    def to_json(self) -> dict:
        return {
            "M": self.M,
            "window_length": self.window_length,
            "final": [c.to_json() for c in self.final()],
        }


def _make_node(nodes, level, mass, lo, hi, gamma, constituents=(), dust=()) -> int:
    a, b = bisect.bisect_left(gamma, lo), bisect.bisect_right(gamma, hi)
    n = ClusterNode(len(nodes), level, mass, lo, hi, np.asarray(gamma[a:b], dtype=np.int64), tuple(constituents), tuple(dust))
    nodes.append(n)
    return n.id


def build_forest(xi: BinaryWindow | Sequence[int], M: int, window_length: int | None = None) -> ClusterForest:
    """Run the grouping passes on the ones of ``xi``.

    ``xi`` may also be a sorted sequence of 1-positions, in which case
    ``window_length`` is required.  A final cluster ``C`` is provisional when
    ``omega(C) + M^(m(C)+1) > window_length``, and so is every final cluster
    at or to the right of the leftmost such cluster.
    """
    if M < 3:
        raise InvalidOperand("M must be at least 3")
    if isinstance(xi, BinaryWindow):
        gamma = (np.flatnonzero(xi.as_array()) + 1).tolist()
        N = len(xi) if window_length is None else window_length
    else:
        gamma = sorted(int(g) for g in xi)
        if window_length is None:
            raise InvalidOperand("window_length is required for a point list")
        N = window_length
    nodes: list[ClusterNode] = []
    current = [_make_node(nodes, 0, 1, g, g, gamma) for g in gamma]
    levels = [tuple(current)]
    k = 0
    while current and max(nodes[i].mass for i in current) >= k + 1:
        gap = M ** (k + 1)
        pos = {cid: t for t, cid in enumerate(current)}
        heavy = [cid for cid in current if nodes[cid].mass >= k + 1]
        runs, run = [], [heavy[0]] if heavy else []
        for prev, nxt in zip(heavy, heavy[1:]):
            if nodes[nxt].alpha - nodes[prev].omega < gap:
                run.append(nxt)
            else:
                runs.append(run)
                run = [nxt]
        if run:
            runs.append(run)
        merged = {}
        for run in runs:
            if len(run) < 2:
                continue
            first, last = pos[run[0]], pos[run[-1]]
            inside = set(run)
            dust = tuple(c for c in current[first : last + 1] if c not in inside)
            mass = sum(nodes[c].mass for c in run) - k * (len(run) - 1)
            kids = run if k >= 1 else ()
            nid = _make_node(nodes, k + 1, mass, nodes[run[0]].alpha, nodes[run[-1]].omega, gamma, kids, dust)
            merged[first] = (last, nid)
        if merged:
            nxt_part, t = [], 0
            while t < len(current):
                if t in merged:
                    last, nid = merged[t]
                    nxt_part.append(nid)
                    t = last + 1
                else:
                    nxt_part.append(current[t])
                    t += 1
            current = nxt_part
        levels.append(tuple(current))
        k += 1
    forest = ClusterForest(np.asarray(gamma, dtype=np.int64), nodes, levels, tuple(current), M, N)
    _mark_provisional(forest)
    for cid in current:
        for g in nodes[cid].members.tolist():
            forest._owner[g] = cid
    return forest


def _mark_provisional(forest: ClusterForest) -> None:
    N, M = forest.window_length, forest.M
    start = None
    for cid in forest.final_partition:
        c = forest.nodes[cid]
        if c.omega + M ** (c.mass + 1) > N:
            start = c.alpha
            break
    if start is not None:
        for n in forest.nodes:
            if n.alpha >= start:
                n.provisional = True


def kappa(forest: ClusterForest, x: int) -> int:
    """Highest level of a cluster containing ``x``."""
    return forest.final_cluster_of(x).level


def chi(forest: ClusterForest) -> int | str:
    """Least ``k`` such that every final cluster of mass ``> k`` starts at
    distance ``>= M^mass`` from the origin.

    Only stable clusters are used.  The value is reported as
    ``NOT_DETERMINED`` when some provisional cluster starts below
    ``M^(mass+1)`` with ``mass + 1`` above the stable value, since one more
    unit of mass from beyond the window would then raise the answer.
    """
    M = forest.M
    value = 0
    for c in forest.stable():
        if c.alpha < M**c.mass:
            value = max(value, c.mass)
    for c in forest.final():
        if c.provisional and c.alpha < M ** (c.mass + 1) and c.mass + 1 > value:
            return NOT_DETERMINED
    return value


def chi_culprit(forest: ClusterForest) -> ClusterNode | None:
    """The stable final cluster of mass ``chi`` lying too close to the origin."""
    value = chi(forest)
    if value == NOT_DETERMINED or value == 0:
        return None
    M = forest.M
    hits = [c for c in forest.stable() if c.mass == value and c.alpha < M**value]
    if len(hits) != 1:
        raise AssertionError(f"expected one cluster forcing chi={value}, found {len(hits)}")
    return hits[0]


def psi_from_xi(forest: ClusterForest) -> WeightedWord:
    """Weighted word with mass ``m(C_j)`` at ``alpha(C_j) - sum_{t<j} diam(C_t)``
    over the stable final clusters; the word covers the stable prefix."""
    shift = 0
    out = {}
    for c in forest.stable():
        out[c.alpha - shift] = c.mass
        shift += c.diameter
    n = forest.stable_length() - shift
    w = np.zeros(max(n, 0), dtype=np.int64)
    for i, m in out.items():
        w[i - 1] = m
    return WeightedWord.from_array(w)


def thinning_positions(forest: ClusterForest) -> np.ndarray:
    """Zeros of the window lying inside a stable final span (1-based, sorted)."""
    parts = []
    for c in forest.stable():
        if c.diameter:
            span = np.arange(c.alpha, c.omega + 1, dtype=np.int64)
            parts.append(np.setdiff1d(span, c.members, assume_unique=True))
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)


def thin_xi(xi: BinaryWindow, forest: ClusterForest) -> BinaryWindow:
    """Delete the zeros inside stable final spans; the result is truncated to
    the thinned image of the stable prefix."""
    n = forest.stable_length()
    keep = np.ones(n, dtype=bool)
    keep[thinning_positions(forest) - 1] = False
    return BinaryWindow(xi.as_array()[:n][keep].tobytes())


def kept_positions(forest: ClusterForest) -> np.ndarray:
    """1-based positions of the original window that survive thinning."""
    n = forest.stable_length()
    keep = np.ones(n, dtype=bool)
    keep[thinning_positions(forest) - 1] = False
    return np.flatnonzero(keep) + 1


def thinning_steps(forest: ClusterForest) -> list[WitnessStep]:
    """Delete-zero steps on the second side realising :func:`thin_xi`,
    with indices adjusted for earlier removals."""
    pos = thinning_positions(forest)
    steps: list[WitnessStep] = []
    for r, p in enumerate(pos.tolist()):
        idx = p - r
        if steps and steps[-1].index == idx:
            steps[-1] = WitnessStep(SECOND, DELETE_ZERO, idx, steps[-1].count + 1)
        else:
            steps.append(WitnessStep(SECOND, DELETE_ZERO, idx))
    return steps


def preceq_M(psi: WeightedWord, zeta: WeightedWord, M: int) -> bool:
    """Same zero pattern, and ``k <= zeta_j <= 3 M^(k-1)`` wherever ``psi_j = k > 0``,
    over the common window."""
    n = min(len(psi), len(zeta))
    a = psi.capped_array()[:n]
    b = zeta.capped_array()[:n]
    if not np.array_equal(a == 0, b == 0):
        return False
    for j in np.flatnonzero(a).tolist():
        k, z = psi.weights[j], zeta.weights[j]
        if not k <= z <= 3 * M ** (k - 1):
            return False
    return True


@dataclass(frozen=True)
class GenealogyTree:
    """Merge tree of a cluster, cut at level-1 (or level-0) nodes."""

    level: int
    mass: int
    children: tuple["GenealogyTree", ...] = ()

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def leaves(self) -> list["GenealogyTree"]:
        if self.is_leaf:
            return [self]
        return [x for c in self.children for x in c.leaves()]

    def branches(self) -> list["GenealogyTree"]:
        if self.is_leaf:
            return []
        return [self] + [x for c in self.children for x in c.branches()]

    def mass_identity(self) -> int:
        """Leaf masses minus ``(n_j - 1)(level_j - 1)`` over branch nodes."""
        return sum(t.mass for t in self.leaves()) - sum((len(b.children) - 1) * (b.level - 1) for b in self.branches())

    def degree_identity(self) -> tuple[int, int]:
        return sum(len(b.children) - 1 for b in self.branches()), len(self.leaves()) - 1


def genealogy(forest: ClusterForest, cluster: ClusterNode | int) -> GenealogyTree:
    cid = cluster if isinstance(cluster, int) else cluster.id

    def rec(i: int) -> GenealogyTree:
        n = forest.nodes[i]
        if n.level <= 1:
            return GenealogyTree(n.level, n.mass)
        kids = tuple(rec(c) for c in n.constituents)
        for t in kids:
            if t.level >= n.level:
                raise AssertionError("levels must decrease from root to leaf")
        return GenealogyTree(n.level, n.mass, kids)

    tree = rec(cid)
    if tree.mass_identity() != tree.mass:
        raise AssertionError("leaf-mass identity fails")
    a, b = tree.degree_identity()
    if a != b:
        raise AssertionError("branching identity fails")
    return tree


def zero_prefix(xi: BinaryWindow, n: int) -> BinaryWindow:
    """Set positions ``1..n`` to zero."""
    if n < 0:
        raise InvalidOperand("n must be nonnegative")
    arr = xi.as_array().copy()
    arr[: min(n, len(arr))] = 0
    return BinaryWindow(arr.tobytes())


def check_forest(forest: ClusterForest) -> None:
    """Raise AssertionError if any structural property of the grouping fails."""
    nodes, gamma, M = forest.nodes, forest.gamma_points, forest.M
    gset = gamma.tolist()
    prev_owner = None
    for part in forest.levels:
        members = np.concatenate([nodes[c].members for c in part]) if part else np.zeros(0, dtype=np.int64)
        if members.tolist() != gset:
            raise AssertionError("a level is not a partition of Gamma in order")
        for a, b in zip(part, part[1:]):
            if nodes[a].omega >= nodes[b].alpha:
                raise AssertionError("spans overlap")
        owner = {g: c for c in part for g in nodes[c].members.tolist()}
        if prev_owner is not None:
            # refinement: each old cluster sits inside one new cluster
            for c in set(prev_owner.values()):
                targets = {owner[g] for g in nodes[c].members.tolist()}
                if len(targets) != 1:
                    raise AssertionError("levels are not nested")
        prev_owner = owner
    for n in nodes:
        if n.mass < n.level + 1:
            raise AssertionError(f"cluster {n.id} has mass below level + 1")
        lo, hi = np.searchsorted(gamma, n.alpha), np.searchsorted(gamma, n.omega, "right")
        if not np.array_equal(gamma[lo:hi], n.members):
            raise AssertionError(f"cluster {n.id} members differ from span ∩ Gamma")
        if n.diameter >= 3 * M ** (n.mass - 1):
            raise AssertionError(f"cluster {n.id} diameter {n.diameter} not below 3M^(m-1)")
        if n.level >= 2:
            kids = [nodes[c] for c in n.constituents]
            if len(kids) < 2:
                raise AssertionError("merge needs two constituents")
            for c in kids:
                if c.mass < n.level or c.mass >= n.mass:
                    raise AssertionError(f"constituent mass rule fails at {n.id}")
            if n.level >= 2 and n.mass < max(c.mass for c in kids) + 1:
                raise AssertionError("mass growth fails")
    stable = forest.stable()
    for i, c in enumerate(stable):
        reach = M**c.mass
        for d in stable[i + 1 :]:
            dist = d.alpha - c.omega
            if dist >= reach:
                break
            if dist < M ** min(c.mass, d.mass):
                raise AssertionError(f"clusters {c.id} and {d.id} are too close")


def mass_start_counts(forest: ClusterForest, z: int) -> dict[int, int]:
    """Masses of all clusters (any level) whose left end is ``z``."""
    out: dict[int, int] = {}
    for n in forest.nodes:
        if n.alpha == z and not n.provisional:
            out[n.mass] = out.get(n.mass, 0) + 1
    return out


__all__ = [
    "NOT_DETERMINED",
    "ClusterNode",
    "ClusterForest",
    "GenealogyTree",
    "build_forest",
    "check_forest",
    "kappa",
    "chi",
    "chi_culprit",
    "psi_from_xi",
    "thin_xi",
    "thinning_positions",
    "thinning_steps",
    "kept_positions",
    "preceq_M",
    "genealogy",
    "zero_prefix",
    "mass_start_counts",
]
