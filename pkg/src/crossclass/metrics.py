"""Adapted Rand error and variation of information from a contingency table."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyTable, ShapeMismatch


@dataclass(frozen=True)
class ContingencyTable:
    """Sparse co-occurrence counts.

    ``counts[m]`` voxels have predicted group ``rows[m]`` and gt label
    ``cols[m]``. Predicted-0 voxels are each their own group, so row ids are
    synthetic and only their grouping matters.
    """

    rows: np.ndarray
    cols: np.ndarray
    counts: np.ndarray
    ignore_background: bool

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def row_sums(self) -> np.ndarray:
        _, inv = np.unique(self.rows, return_inverse=True)
        return np.bincount(inv.reshape(-1), weights=self.counts).astype(np.int64)

    def col_sums(self) -> np.ndarray:
        _, inv = np.unique(self.cols, return_inverse=True)
        return np.bincount(inv.reshape(-1), weights=self.counts).astype(np.int64)


def _as_array(a) -> np.ndarray:
    return np.asarray(a.data if hasattr(a, "data") else a)


def contingency(pred, gt, ignore_background: bool = True) -> ContingencyTable:
    p = _as_array(pred).ravel().astype(np.int64)
    g = _as_array(gt).ravel().astype(np.int64)
    if _as_array(pred).shape != _as_array(gt).shape:
        raise ShapeMismatch(f"pred {_as_array(pred).shape} vs gt {_as_array(gt).shape}")
    if ignore_background:
        keep = g != 0
        p, g = p[keep], g[keep]
    zero = p == 0
    # unique negative ids make every unlabelled voxel a singleton row
    p = p.copy()
    p[zero] = -1 - np.arange(int(zero.sum()), dtype=np.int64)
    if p.size == 0:
        empty = np.zeros(0, dtype=np.int64)
        return ContingencyTable(empty, empty, empty, ignore_background)
    pairs, counts = np.unique(np.stack([p, g]), axis=1, return_counts=True)
    return ContingencyTable(pairs[0], pairs[1], counts.astype(np.int64), ignore_background)


def _check(t: ContingencyTable) -> None:
    if t.total == 0:
        raise EmptyTable("contingency table has no voxels")


def adapted_rand_error(t: ContingencyTable) -> tuple[float, float, float]:
    """Return (error, precision, recall); error is 1 - F-score of pair co-clustering."""
    _check(t)
    n = t.counts.astype(np.float64)
    both = float(np.sum(n * n))
    s = t.row_sums().astype(np.float64)
    c = t.col_sums().astype(np.float64)
    precision = both / float(np.sum(s * s))
    recall = both / float(np.sum(c * c))
    error = 1.0 - 2.0 * precision * recall / (precision + recall)
    return max(0.0, error), precision, recall


def variation_of_information(t: ContingencyTable) -> tuple[float, float, float]:
    """Return (vi, split, merge) in bits; split = H(pred|gt), merge = H(gt|pred)."""
    _check(t)
    total = float(t.total)
    p = t.counts / total
    _, row_inv = np.unique(t.rows, return_inverse=True)
    _, col_inv = np.unique(t.cols, return_inverse=True)
    r = t.row_sums()[row_inv.reshape(-1)] / total
    q = t.col_sums()[col_inv.reshape(-1)] / total
    split = max(0.0, float(-np.sum(p * np.log2(p / q))))
    merge = max(0.0, float(-np.sum(p * np.log2(p / r))))
    return split + merge, split, merge


def evaluate(pred, gt, ignore_background: bool = True, seeded_only: bool = False) -> dict[str, float]:
    """All six scores. ``seeded_only`` drops voxels where ``pred`` is 0."""
    if seeded_only:
        p, g = _as_array(pred), _as_array(gt)
        if p.shape != g.shape:
            raise ShapeMismatch(f"pred {p.shape} vs gt {g.shape}")
        gt = np.where(p > 0, g, 0)
        ignore_background = True
    t = contingency(pred, gt, ignore_background)
    err, prec, rec = adapted_rand_error(t)
    vi, split, merge = variation_of_information(t)
    return {
        "rand_error": err,
        "precision": prec,
        "recall": rec,
        "vi": vi,
        "vi_split": split,
        "vi_merge": merge,
    }
