"""Per-section over-segmentation from a border elevation map.

Markers are the h-deep regional minima of each section; they are grown by a
priority flood that stops at ``stop_level``, leaving a background band along
borders. Seeds are then relabelled so labels are unique across the stack.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError
from .volume import LabelStack, ScalarStack, first_occurrence_order, relabel


@dataclass(frozen=True)
class SeedConfig:
    h: float = 0.05
    stop_level: float = 0.5
    min_seed_area: int = 4

    def __post_init__(self):
        if not 0.0 <= self.h <= self.stop_level <= 1.0:
            raise ConfigError(f"need 0 <= h <= stop_level <= 1, got h={self.h}, stop={self.stop_level}")
        if self.min_seed_area < 0:
            raise ConfigError("min_seed_area must be >= 0")


@dataclass(frozen=True)
class SeedVolume:
    """Seed labels 1..global_n; every label lives in exactly one section."""

    labels: LabelStack
    section_of: np.ndarray  # section_of[label] -> z; index 0 unused (-1)
    sizes: np.ndarray  # sizes[label] -> pixel count; index 0 unused

    @property
    def global_n(self) -> int:
        return len(self.section_of) - 1


def regional_minima_2d(section: np.ndarray, h: float) -> np.ndarray:
    """Label each maximal 4-connected C with max(C) <= min(C) + h and no
    4-neighbour below min(C). Markers are numbered 1..m in raster order.

    Such sets are exactly the components D of the level set
    ``{v <= min(D) + h}``; the kernel finds them with a union-find sweep in
    ascending value order and then floods each one.
    """
    section = np.asarray(section)
    if section.ndim != 2:
        raise ValueError("expected a 2-D section")
    return kernels.minima_markers(section, h)


def grow_seeds_2d(markers: np.ndarray, elevation: np.ndarray, stop_level: float) -> np.ndarray:
    """Grow markers over pixels with elevation < stop_level.

    Pixels are claimed by the first region to reach them, popping the flood
    queue in (elevation, y, x) order. A marker cut in two by the stop level
    yields two regions; output regions are renumbered in raster order.
    """
    if markers.shape != elevation.shape:
        raise ValueError(f"marker shape {markers.shape} != elevation shape {elevation.shape}")
    grown = kernels.priority_flood(elevation, markers, stop_level)
    return kernels.split_components(grown)


def seed_section(elevation: np.ndarray, cfg: SeedConfig) -> np.ndarray:
    """Seeds for one section, compact 1..n in raster order, small seeds removed."""
    seeds = grow_seeds_2d(regional_minima_2d(elevation, cfg.h), elevation, cfg.stop_level)
    if cfg.min_seed_area > 1 and seeds.max(initial=0) > 0:
        area = np.bincount(seeds.ravel())
        small = area < cfg.min_seed_area
        small[0] = False
        if small.any():
            keep = ~small
            remap = np.where(keep, np.cumsum(keep) - 1, 0).astype(np.int32)
            seeds = remap[seeds]
    return seeds


class SeedAccumulator:
    """Offsets per-section seeds into one global label space, in z order."""

    def __init__(self):
        self.section_of = [-1]
        self.sizes = [0]

    @property
    def count(self) -> int:
        return len(self.section_of) - 1

    def add(self, z: int, seeds: np.ndarray) -> np.ndarray:
        n = int(seeds.max(initial=0))
        offset = self.count
        out = np.where(seeds > 0, seeds.astype(np.uint32) + np.uint32(offset), 0).astype(np.uint32)
        self.section_of.extend([z] * n)
        self.sizes.extend(np.bincount(seeds.ravel(), minlength=n + 1)[1:].tolist())
        return out

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.section_of, dtype=np.int64), np.asarray(self.sizes, dtype=np.int64)


def seed_volume(elev: ScalarStack, cfg: SeedConfig, workers: int = 1) -> SeedVolume:
    elev.validate()
    data = np.asarray(elev.data)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            per_section = list(pool.map(lambda s: seed_section(s, cfg), data))
    else:
        per_section = [seed_section(s, cfg) for s in data]
    acc = SeedAccumulator()
    labels = np.stack([acc.add(z, s) for z, s in enumerate(per_section)])
    section_of, sizes = acc.arrays()
    return SeedVolume(LabelStack(labels), section_of, sizes)


class PieceSplitter:
    """Section-by-section conversion of precomputed masks into seeds.

    Every 4-connected in-section piece of an input label becomes one seed.
    ``links`` collects (first seed, later seed) pairs that came from the same
    input label, so the caller can pre-link them.
    """

    def __init__(self, acc: SeedAccumulator | None = None):
        self.acc = acc or SeedAccumulator()
        self.links: list[tuple[int, int]] = []
        self._owner: dict[int, int] = {}

    def add(self, z: int, section: np.ndarray) -> np.ndarray:
        sec = np.asarray(section)
        pieces = kernels.split_components(relabel(sec, first_occurrence_order(sec), dtype=np.int32))
        n = int(pieces.max(initial=0))
        origin = np.zeros(n + 1, dtype=np.int64)
        origin[pieces.ravel()] = sec.ravel()
        base = self.acc.count
        out = self.acc.add(z, pieces)
        for i in range(1, n + 1):
            o = int(origin[i])
            if o in self._owner:
                self.links.append((self._owner[o], base + i))
            else:
                self._owner[o] = base + i
        return out


def seed_volume_from_labels(labels: LabelStack) -> tuple[SeedVolume, list[tuple[int, int]]]:
    """In-memory form of :class:`PieceSplitter` over a whole stack."""
    splitter = PieceSplitter()
    out = np.stack([splitter.add(z, labels.section(z)) for z in range(labels.shape[0])])
    section_of, sizes = splitter.acc.arrays()
    return SeedVolume(LabelStack(out), section_of, sizes), splitter.links
