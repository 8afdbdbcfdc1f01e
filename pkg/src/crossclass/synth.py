"""Synthetic ground truth: branching tubes crossing an anisotropic stack.

Each object has a trunk centreline that random-walks in (y, x) from section
to section and stochastically spawns thinner branches that wander off on their
own. Trunks are placed with a minimum clearance so they never touch; branches
may crowd other objects, and any voxel that is 26-adjacent to a different
label is cleared to background, except trunk centre voxels. The elevation map
is a per-section boundary indicator, optionally blurred in-plane and noised.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import ConfigError, ConfigInfeasible
from .volume import Dims, LabelStack, ScalarStack, compact_labels

MAX_BRANCHES = 3
BAND_FLOOR = 0.5
ANCHOR_CEIL = 0.25


@dataclass(frozen=True)
class GenConfig:
    z: int = 32
    y: int = 128
    x: int = 128
    n_objects: int = 24
    mean_radius: float = 6.0
    branch_prob: float = 0.02
    drift_sigma: float = 1.0
    gap_prob: float = 0.0
    elevation_blur_radius: float = 1.0
    noise_sigma: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        Dims(self.z, self.y, self.x)
        if self.n_objects < 1:
            raise ConfigError("n_objects must be >= 1")
        if self.mean_radius < 1:
            raise ConfigError("mean_radius must be >= 1")
        for name in ("branch_prob", "gap_prob"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must be a probability, got {p}")
        for name in ("drift_sigma", "elevation_blur_radius", "noise_sigma"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.rng_seed < 0:
            raise ConfigError("rng_seed must be non-negative")

    @property
    def dims(self) -> Dims:
        return Dims(self.z, self.y, self.x)

    @classmethod
    def from_dict(cls, d: dict) -> "GenConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown GenConfig keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "GenConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)


class _Tip:
    __slots__ = ("cy", "cx", "r", "vy", "vx")

    def __init__(self, cy, cx, r, vy=0.0, vx=0.0):
        self.cy, self.cx, self.r, self.vy, self.vx = cy, cx, r, vy, vx


def _clearance(ri, rj):
    return ri + rj + 3.0


def _place_trunks(cfg, rng, radii):
    """Initial trunk centres with pairwise clearance, by rejection."""
    centers = []
    for r in radii:
        for _ in range(200):
            cy = rng.uniform(r, cfg.y - 1 - r)
            cx = rng.uniform(r, cfg.x - 1 - r)
            if all(math.hypot(cy - oy, cx - ox) >= _clearance(r, orr) for (oy, ox), orr in zip(centers, radii)):
                centers.append((cy, cx))
                break
        else:
            raise ConfigInfeasible(
                f"cannot place {cfg.n_objects} objects of radius ~{cfg.mean_radius} in {cfg.y}x{cfg.x}"
            )
    return centers


def _paint_disc(canvas, cy, cx, r, value, only_empty):
    ny, nx = canvas.shape
    y0, y1 = max(int(math.floor(cy - r)), 0), min(int(math.ceil(cy + r)) + 1, ny)
    x0, x1 = max(int(math.floor(cx - r)), 0), min(int(math.ceil(cx + r)) + 1, nx)
    if y0 >= y1 or x0 >= x1:
        return
    yy, xx = np.ogrid[y0:y1, x0:x1]
    disc = (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r
    view = canvas[y0:y1, x0:x1]
    if only_empty:
        disc &= view == 0
    view[disc] = value


def _draw_labels(cfg: GenConfig, rng) -> tuple[np.ndarray, np.ndarray]:
    ny, nx = cfg.y, cfg.x
    radii = [max(1.0, cfg.mean_radius * rng.uniform(0.7, 1.3)) for _ in range(cfg.n_objects)]
    if 2 * max(radii) + 1 > min(ny, nx):
        raise ConfigInfeasible(f"object diameter exceeds section size {ny}x{nx}")
    if sum(math.pi * r * r for r in radii) > ny * nx:
        raise ConfigInfeasible("total object area exceeds section area")
    trunks = [_Tip(cy, cx, r) for (cy, cx), r in zip(_place_trunks(cfg, rng, radii), radii)]
    branches: list[list[_Tip]] = [[] for _ in trunks]

    labels = np.zeros(cfg.dims.shape, dtype=np.uint32)
    core = np.zeros(cfg.dims.shape, dtype=bool)
    for z in range(cfg.z):
        if z > 0:
            prev = [(t.cy, t.cx) for t in trunks]
            for i, t in enumerate(trunks):
                for _ in range(20):
                    cy = float(np.clip(t.cy + rng.normal(0, cfg.drift_sigma), t.r, ny - 1 - t.r))
                    cx = float(np.clip(t.cx + rng.normal(0, cfg.drift_sigma), t.r, nx - 1 - t.r))
                    ok = all(
                        math.hypot(cy - oy, cx - ox) >= _clearance(t.r, trunks[j].r)
                        for j, (oy, ox) in enumerate(prev)
                        if j != i
                    ) and all(
                        math.hypot(cy - trunks[j].cy, cx - trunks[j].cx) >= _clearance(t.r, trunks[j].r)
                        for j in range(i)
                    )
                    if ok:
                        t.cy, t.cx = cy, cx
                        break
            for i, tips in enumerate(branches):
                for b in tips:
                    b.cy = float(np.clip(b.cy + b.vy + rng.normal(0, cfg.drift_sigma), b.r, ny - 1 - b.r))
                    b.cx = float(np.clip(b.cx + b.vx + rng.normal(0, cfg.drift_sigma), b.r, nx - 1 - b.r))
        for i, t in enumerate(trunks):
            if len(branches[i]) < MAX_BRANCHES and rng.random() < cfg.branch_prob:
                angle = rng.uniform(0, 2 * math.pi)
                speed = max(cfg.drift_sigma, 0.5)
                r = max(1.0, t.r * rng.uniform(0.4, 0.7))
                branches[i].append(_Tip(t.cy, t.cx, r, speed * math.sin(angle), speed * math.cos(angle)))

        present = [rng.random() >= cfg.gap_prob for _ in trunks]
        sec = labels[z]
        for i, t in enumerate(trunks):
            if present[i]:
                _paint_disc(sec, t.cy, t.cx, t.r, i + 1, only_empty=False)
                core[z, int(round(t.cy)), int(round(t.cx))] = True
        for i, tips in enumerate(branches):
            if present[i]:
                for b in tips:
                    _paint_disc(sec, b.cy, b.cx, b.r, i + 1, only_empty=True)
    return labels, core


def _separate(labels: np.ndarray, core: np.ndarray) -> np.ndarray:
    """Clear non-core voxels that are 26-adjacent to a different nonzero label."""
    big = np.iinfo(np.uint32).max
    hi = ndimage.maximum_filter(labels, size=3, mode="nearest")
    lo = ndimage.minimum_filter(np.where(labels == 0, big, labels), size=3, mode="nearest")
    conflict = (labels > 0) & ((hi != labels) | (lo != labels)) & ~core
    out = labels.copy()
    out[conflict] = 0
    return out


def boundary_band(section: np.ndarray) -> np.ndarray:
    """Pixels whose 3x3 in-section neighbourhood holds a label other than their own."""
    s = section.astype(np.int64)
    hi = ndimage.maximum_filter(s, size=3, mode="nearest")
    lo = ndimage.minimum_filter(s, size=3, mode="nearest")
    return (hi != s) | (lo != s)


def _anchor_pixels(section: np.ndarray, interior: np.ndarray):
    """For each label, the interior pixel nearest its in-section centroid."""
    out = []
    for lab, sl in enumerate(ndimage.find_objects(section), start=1):
        if sl is None:
            continue
        region = section[sl] == lab
        inner = region & interior[sl]
        if not inner.any():
            continue
        cy, cx = ndimage.center_of_mass(region)
        iy, ix = np.nonzero(inner)
        d = (iy - cy) ** 2 + (ix - cx) ** 2
        k = int(np.lexsort((ix, iy, d))[0])
        out.append((iy[k] + sl[0].start, ix[k] + sl[1].start))
    return out


def elevation_from_labels(gt: np.ndarray, blur: float, noise_sigma: float, rng) -> np.ndarray:
    indicator = np.ones(gt.shape, dtype=np.float64)
    band = np.zeros(gt.shape, dtype=bool)
    for z in range(gt.shape[0]):
        band[z] = boundary_band(gt[z])
    interior = (gt > 0) & ~band
    indicator[interior] = 0.0
    if blur > 0:
        elev = ndimage.gaussian_filter(indicator, sigma=(0.0, blur, blur), mode="nearest")
    else:
        elev = indicator
    if noise_sigma > 0:
        elev = elev + rng.normal(0.0, noise_sigma, size=elev.shape)
    elev = np.clip(elev, 0.0, 1.0)
    hard = ~interior
    elev[hard] = np.maximum(elev[hard], BAND_FLOOR)
    for z in range(gt.shape[0]):
        for y, x in _anchor_pixels(gt[z], interior[z]):
            elev[z, y, x] = min(elev[z, y, x], ANCHOR_CEIL)
    return elev.astype(np.float32)


def generate_stack(cfg: GenConfig) -> tuple[LabelStack, ScalarStack]:
    """Ground-truth labels (compact, 1..N) and a matching elevation map."""
    rng = np.random.default_rng(cfg.rng_seed)
    raw, core = _draw_labels(cfg, rng)
    gt, _ = compact_labels(LabelStack(_separate(raw, core)))
    if gt.data.max(initial=0) == 0:
        raise ConfigInfeasible("no object survived generation")
    elev = elevation_from_labels(np.asarray(gt.data), cfg.elevation_blur_radius, cfg.noise_sigma, rng)
    return gt, ScalarStack(elev)


def perturb_elevation(elev: ScalarStack, sigma: float, rng_seed: int) -> ScalarStack:
    """Add N(0, sigma) per voxel and clamp to [0, 1]."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return ScalarStack(np.array(elev.data))
    rng = np.random.default_rng(rng_seed)
    noisy = elev.data.astype(np.float64) + rng.normal(0.0, sigma, size=elev.shape)
    return ScalarStack(np.clip(noisy, 0.0, 1.0))
