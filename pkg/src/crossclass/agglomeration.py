"""Overlap graph between seeds of different sections and its agglomeration.

An edge i -> j links source seed i to target seed j with weight
``|pred_i & seed_j| / |seed_j|``, where pred_i is the transferred prediction of
seed i. Seeds joined by an edge heavier than the threshold are merged; small
leftover components ("orphans") are then greedily attached along their best
edge.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np

from .errors import ConfigError, ShapeMismatch


@dataclass(frozen=True)
class OverlapEdge:
    src_z: int
    src_seed: int
    dst_z: int
    dst_seed: int
    overlap_pixels: int
    weight: float


@dataclass(frozen=True)
class MergeConfig:
    window: int = 2
    threshold: float = 0.1
    min_component_size: int = 200

    def __post_init__(self):
        if self.window < 1:
            raise ConfigError("window must be >= 1")
        if not 0.0 < self.threshold <= 1.0:
            raise ConfigError("threshold must be in (0, 1]")
        if self.min_component_size < 0:
            raise ConfigError("min_component_size must be >= 0")


def overlap_edges(pred: np.ndarray, seeds_tgt: np.ndarray, src_z: int = 0, dst_z: int = 1) -> list[OverlapEdge]:
    """One edge per (source seed, target seed) pair that overlaps, sorted by seeds."""
    pred = np.asarray(pred)
    seeds_tgt = np.asarray(seeds_tgt)
    if pred.shape != seeds_tgt.shape:
        raise ShapeMismatch(f"prediction {pred.shape} vs target seeds {seeds_tgt.shape}")
    both = (pred > 0) & (seeds_tgt > 0)
    if not both.any():
        return []
    p = pred[both].astype(np.int64)
    s = seeds_tgt[both].astype(np.int64)
    pairs, counts = np.unique(np.stack([p, s]), axis=1, return_counts=True)
    tgt_ids, tgt_sizes = np.unique(seeds_tgt[seeds_tgt > 0], return_counts=True)
    size_of = dict(zip(tgt_ids.tolist(), tgt_sizes.tolist()))
    return [
        OverlapEdge(src_z, i, dst_z, j, c, c / size_of[j])
        for i, j, c in zip(pairs[0].tolist(), pairs[1].tolist(), counts.tolist())
    ]


class Partition:
    """Union-find over seed labels 1..n with voxel sizes per component."""

    def __init__(self, sizes: Sequence[int]):
        # sizes[0] is a placeholder for background
        sizes = np.asarray(sizes, dtype=np.int64)
        self.n = len(sizes) - 1
        self.parent = np.arange(self.n + 1, dtype=np.int64)
        self.size = sizes.copy()
        self.size[0] = 0
        self._rank = np.zeros(self.n + 1, dtype=np.int8)

    def find(self, a: int) -> int:
        parent = self.parent
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return int(root)

    def union(self, a: int, b: int) -> int:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return ra
        if self._rank[ra] < self._rank[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        if self._rank[ra] == self._rank[rb]:
            self._rank[ra] += 1
        return ra

    def copy(self) -> "Partition":
        other = Partition.__new__(Partition)
        other.n = self.n
        other.parent = self.parent.copy()
        other.size = self.size.copy()
        other._rank = self._rank.copy()
        return other

    def roots(self) -> np.ndarray:
        """Root of every label 0..n (entry 0 is 0)."""
        return np.array([self.find(a) for a in range(self.n + 1)], dtype=np.int64)

    def canonical(self) -> np.ndarray:
        """Smallest member label of each label's component; order-independent."""
        roots = self.roots()
        smallest = np.full(self.n + 1, self.n + 1, dtype=np.int64)
        np.minimum.at(smallest, roots, np.arange(self.n + 1))
        out = smallest[roots]
        out[0] = 0
        return out

    def component_sizes(self) -> dict[int, int]:
        canon = self.canonical()
        return {int(c): int(self.size[self.find(int(c))]) for c in np.unique(canon[1:])}

    def n_components(self) -> int:
        return len(np.unique(self.canonical()[1:]))

    def same_as(self, other: "Partition") -> bool:
        return np.array_equal(self.canonical(), other.canonical())


def merge_components(edges: Iterable[OverlapEdge], threshold: float, sizes: Sequence[int] | int, partition: Partition | None = None) -> Partition:
    """Union the endpoints of every edge whose weight exceeds ``threshold``.

    ``sizes`` gives voxel counts per label (index 0 unused) or just the label
    count n, in which case every seed counts as size 1.
    """
    if partition is None:
        if isinstance(sizes, (int, np.integer)):
            sizes = np.ones(int(sizes) + 1, dtype=np.int64)
        partition = Partition(sizes)
    for e in edges:
        if e.weight > threshold:
            partition.union(e.src_seed, e.dst_seed)
    return partition


def resolve_orphans(p: Partition, edges: Sequence[OverlapEdge], min_component_size: int) -> Partition:
    """Attach components smaller than ``min_component_size`` along their best edge.

    Repeatedly take the smallest such component (ties: smallest member label)
    that has an edge to another component and merge it along its heaviest
    incident edge; ties go to more overlap pixels, then to the lower label of
    the seed on the other side. Components without outside edges stay.
    """
    p = p.copy()
    if min_component_size <= 0:
        return p
    incident: dict[int, list] = {}
    for e in edges:
        for own, other in ((e.src_seed, e.dst_seed), (e.dst_seed, e.src_seed)):
            incident.setdefault(own, []).append((e.weight, e.overlap_pixels, other))

    members: dict[int, list[int]] = {}
    for label in range(1, p.n + 1):
        members.setdefault(p.find(label), []).append(label)
    smallest = {r: min(m) for r, m in members.items()}

    heap = [(int(p.size[r]), smallest[r], r) for r in members if p.size[r] < min_component_size]
    heapq.heapify(heap)
    while heap:
        size, low, r = heapq.heappop(heap)
        if p.find(r) != r or p.size[r] != size:
            continue
        best = None
        for label in members[r]:
            for w, ov, other in incident.get(label, ()):
                if p.find(other) == r:
                    continue
                key = (-w, -ov, other)
                if best is None or key < best:
                    best = key
        if best is None:
            continue
        ro = p.find(best[2])
        new = p.union(r, ro)
        old = ro if new == r else r
        members[new] = members[new] + members.pop(old)
        smallest[new] = min(smallest[r], smallest[ro])
        if p.size[new] < min_component_size:
            heapq.heappush(heap, (int(p.size[new]), smallest[new], new))
    return p


def finalize_section(seeds: np.ndarray, component_of: np.ndarray) -> np.ndarray:
    """Map seed labels to component ids through a lookup table."""
    return component_of[np.asarray(seeds, dtype=np.int64)]


def component_table(p: Partition, order: Iterable[int] | None = None) -> np.ndarray:
    """Lookup seed -> compact component id.

    Components are numbered by first appearance of their seeds in ``order``
    (default: ascending seed label, which is z-major first occurrence for
    seeds numbered section by section).
    """
    canon = p.canonical()
    ids = np.zeros(p.n + 1, dtype=np.uint32)
    seen: dict[int, int] = {}
    for s in order if order is not None else range(1, p.n + 1):
        c = int(canon[s])
        if c not in seen:
            seen[c] = len(seen) + 1
        ids[s] = seen[c]
    return ids


def finalize(seeds, p: Partition):
    """3-D segmentation: every seed voxel gets its compacted component id."""
    from .seeding import SeedVolume
    from .volume import LabelStack, first_occurrence_order

    labels = seeds.labels if isinstance(seeds, SeedVolume) else seeds
    data = np.asarray(labels.data)
    table = component_table(p, first_occurrence_order(data).tolist())
    return LabelStack(finalize_section(data, table))


def write_edges(edges: Iterable[OverlapEdge], f: TextIO) -> None:
    for e in edges:
        f.write(f"{e.src_z}\t{e.src_seed}\t{e.dst_z}\t{e.dst_seed}\t{e.overlap_pixels}\t{e.weight:.9g}\n")


def read_edges(f: TextIO) -> list[OverlapEdge]:
    out = []
    for line in f:
        if line.strip():
            a, b, c, d, e, w = line.split()
            out.append(OverlapEdge(int(a), int(b), int(c), int(d), int(e), float(w)))
    return out
