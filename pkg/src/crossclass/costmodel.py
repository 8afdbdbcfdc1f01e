"""Classifier-call accounting: cross-classification versus one-object-at-a-time tracking.

For each pixel p with n(p) distinct objects in its field of view, a
single-object tracker visits p once per object and per revisit,
``n(p) * ceil(1 / rho)`` calls, while cross-classification needs one call per
code digit, ``max(1, ceil(log_l n(p)))``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import kernels
from .encoding import min_digits
from .errors import ConfigError, RhoZero


@dataclass(frozen=True)
class CostConfig:
    fov: int = 33
    l: int = 4
    rho: float = 0.5

    def __post_init__(self):
        if self.fov < 1 or self.fov % 2 == 0:
            raise ConfigError(f"fov must be a positive odd integer, got {self.fov}")
        if self.l < 2:
            raise ConfigError("alphabet size l must be >= 2")
        if self.rho == 0:
            raise RhoZero("rho = 0 means no pixel is ever finalised; cost is undefined")
        if not 0.0 < self.rho <= 1.0:
            raise ConfigError(f"rho must lie in (0, 1], got {self.rho}")


@dataclass(frozen=True)
class CostMap:
    calls_single: np.ndarray
    calls_3c: np.ndarray

    @property
    def total_single(self) -> int:
        return int(self.calls_single.sum())

    @property
    def total_3c(self) -> int:
        return int(self.calls_3c.sum())

    @property
    def ratio(self) -> float:
        return self.total_single / self.total_3c

    @property
    def max_single(self) -> int:
        return int(self.calls_single.max(initial=0))


def object_density_map(labels, fov: int) -> np.ndarray:
    """Distinct nonzero labels in the fov x fov in-section box around each pixel."""
    if fov < 1 or fov % 2 == 0:
        raise ConfigError(f"fov must be a positive odd integer, got {fov}")
    data = np.asarray(labels.data if hasattr(labels, "data") else labels)
    squeeze = data.ndim == 2
    if squeeze:
        data = data[None]
    out = np.stack([kernels.window_distinct_count(sec, fov // 2) for sec in data]).astype(np.int64)
    return out[0] if squeeze else out


def revisits(rho: float) -> int:
    """ceil(1 / rho), robust to 1/rho landing a hair above an integer."""
    if rho == 0:
        raise RhoZero("rho = 0 gives an undefined cost")
    inv = 1.0 / rho
    near = round(inv)
    return int(near) if abs(inv - near) < 1e-9 else math.ceil(inv)


def digits_per_pixel(density: np.ndarray, l: int) -> np.ndarray:
    """max(1, ceil(log_l max(n, 1))) per pixel, computed in integers."""
    density = np.asarray(density, dtype=np.int64)
    uniq, inv = np.unique(density, return_inverse=True)
    table = np.array([min_digits(max(int(n), 1), l) for n in uniq], dtype=np.int64)
    return table[inv].reshape(density.shape)


def call_counts(density, cfg: CostConfig) -> CostMap:
    density = np.asarray(density, dtype=np.int64)
    if density.size and density.min() < 0:
        raise ValueError("object densities must be non-negative")
    return CostMap(density * revisits(cfg.rho), digits_per_pixel(density, cfg.l))


def ratio_curve(density, l: int, rho_list: Iterable[float], fov: int = 1) -> list[tuple[float, float]]:
    """(rho, total_single / total_3c) for each rho; fov only feeds validation."""
    return [(rho, call_counts(density, CostConfig(fov, l, rho)).ratio) for rho in rho_list]


def cost_rows(density, l: int, rho_list: Iterable[float], fov: int = 1) -> list[tuple[float, int, int, float, int]]:
    """Rows (rho, total_single, total_3c, ratio, max_single) for plotting."""
    rows = []
    for rho in rho_list:
        cm = call_counts(density, CostConfig(fov, l, rho))
        rows.append((rho, cm.total_single, cm.total_3c, cm.ratio, cm.max_single))
    return rows


def transfer_pairs(n_sections: int, window: int) -> int:
    """Number of (Z, w) pairs with 0 < |w| <= window and Z + w inside the stack."""
    return sum(min(window, z) + min(window, n_sections - 1 - z) for z in range(n_sections))


def pipeline_calls(n_sections: int, window: int, k: int) -> int:
    """Classifier calls of a full cross-classification run: k per transfer pair."""
    return k * transfer_pairs(n_sections, window)
