"""Track-level clustering from subgraph affinities.

Each pivot subgraph contributes per-track-pair evidence (mean affinity over
cross-track clue pairs with the pair count).  Evidence from all subgraphs is
pooled into one linkage table; pairs scoring above the threshold are linked
and connected components become clusters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput
from .training import GraphTensors


class UnionFind:
    """Disjoint sets over arbitrary hashable ids, path compression plus
    union by size."""

    def __init__(self, items=()):
        self.parent: dict = {}
        self.size: dict = {}
        for x in items:
            self.add(x)

    def add(self, x) -> None:
        if x not in self.parent:
            self.parent[x] = x
            self.size[x] = 1

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]

    def groups(self) -> list[list]:
        out: dict = {}
        for x in self.parent:
            out.setdefault(self.find(x), []).append(x)
        return [sorted(v) for v in out.values()]


def _norm_pair(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


@dataclass
class LinkageTable:
    """Pooled per-track-pair affinity evidence.

    Every subgraph observation is kept as its own (score, count) contribution;
    pooled scores divide the exactly rounded sum of score*count terms by the
    integer count total, so merge order can never change a result.
    """

    contributions: dict[tuple[int, int], list[tuple[float, int]]] = field(
        default_factory=dict
    )

    def add(self, a: int, b: int, score: float, count: int) -> None:
        if a == b:
            raise InvalidInput("linkage is defined between distinct tracks")
        if count < 1:
            raise InvalidInput("count must be >= 1")
        self.contributions.setdefault(_norm_pair(a, b), []).append((float(score), count))

    def score(self, a: int, b: int) -> float:
        entries = self.contributions[_norm_pair(a, b)]
        total = sum(c for _, c in entries)
        return math.fsum(s * c for s, c in entries) / total

    def pairs(self) -> list[tuple[int, int]]:
        return sorted(self.contributions)

    def items(self) -> list[tuple[tuple[int, int], float]]:
        return [(p, self.score(*p)) for p in self.pairs()]


def track_linkage(gt: GraphTensors, affinity: np.ndarray) -> list[tuple[tuple[int, int], float, int]]:
    """Per-track-pair mean affinity over all cross-track clue pairs.

    Returns (pair, score, clue-pair count) for every unordered track pair in
    the subgraph, pairs sorted ascending.
    """
    n = gt.n_real
    if affinity.shape != (n, n):
        raise InvalidInput("affinity shape does not match the graph")
    tracks = sorted(set(gt.track.tolist()))
    out = []
    for ai in range(len(tracks)):
        for bi in range(ai + 1, len(tracks)):
            a, b = tracks[ai], tracks[bi]
            ia = np.flatnonzero(gt.track == a)
            ib = np.flatnonzero(gt.track == b)
            block = affinity[np.ix_(ia, ib)]
            out.append(((a, b), float(np.mean(block)), int(block.size)))
    return out


def merge_linkages(tables: list[LinkageTable]) -> LinkageTable:
    """Pool evidence across subgraph tables; order cannot matter."""
    if not tables:
        raise InvalidInput("need at least one linkage table")
    merged = LinkageTable()
    for t in tables:
        for pair, entries in t.contributions.items():
            merged.contributions.setdefault(pair, []).extend(entries)
    return merged


@dataclass
class ClusterAssignment:
    """track_id -> contiguous cluster id, ids ordered by each cluster's
    smallest member track."""

    assignment: dict[int, int]
    n_clusters: int


def cluster(
    linkage: LinkageTable, threshold: float, all_track_ids: list[int]
) -> ClusterAssignment:
    """Union tracks whose pooled linkage strictly exceeds the threshold."""
    if not 0.0 < threshold < 1.0:
        raise InvalidInput("threshold must be in (0, 1)")
    if len(set(all_track_ids)) != len(all_track_ids):
        raise InvalidInput("duplicate track ids")
    uf = UnionFind(all_track_ids)
    for (a, b), score in linkage.items():
        if a not in uf.parent or b not in uf.parent:
            raise InvalidInput(f"linkage references unknown track pair ({a}, {b})")
        if score > threshold:
            uf.union(a, b)
    groups = sorted(uf.groups(), key=lambda g: g[0])
    assignment: dict[int, int] = {}
    for cid, members in enumerate(groups):
        for t in members:
            assignment[t] = cid
    return ClusterAssignment(assignment=assignment, n_clusters=len(groups))
