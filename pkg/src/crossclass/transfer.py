"""Seed transfer between sections by cross-classification.

A per-digit classifier maps one colour image of the source seeds to a colour
image at the target section. Running it once per digit and decoding the k
predicted symbols per pixel gives the transferred seed labels.

Two reference classifiers are provided: an oracle that reads ground truth
(with optional symbol-flip noise) and a geodesic flood on the target
elevation map.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from typing import Optional, Protocol

import numpy as np

from . import kernels
from .encoding import Codebook, ColoredSection, DecodePolicy, decode_pixels, encode_digit
from .errors import ConfigError, InvariantViolation, LabelOutOfRange, MissingGroundTruth


@dataclass(frozen=True)
class TransferContext:
    """Inputs available to a classifier for one (source, target) pair."""

    source_z: int
    target_z: int
    elev_target: Optional[np.ndarray] = None
    raw: Optional[np.ndarray] = None
    gt_source: Optional[np.ndarray] = None
    gt_target: Optional[np.ndarray] = None
    window: Optional[int] = None

    def __post_init__(self):
        if self.source_z == self.target_z:
            raise InvariantViolation("source and target sections must differ")
        if min(self.source_z, self.target_z) < 0:
            raise InvariantViolation("section indices must be non-negative")
        if self.window is not None and abs(self.target_z - self.source_z) > self.window:
            raise InvariantViolation(f"|{self.target_z} - {self.source_z}| exceeds window {self.window}")


class DigitClassifier(Protocol):
    """Maps a source colour image to a predicted colour image at the target.

    Must be deterministic and must not depend on the digit index except
    through the colour image itself.
    """

    def __call__(self, colored: ColoredSection, ctx: TransferContext) -> ColoredSection: ...


def _noise_rng(colors: np.ndarray, ctx: TransferContext, rng_seed: int) -> np.random.Generator:
    digest = hashlib.blake2b(np.ascontiguousarray(colors).tobytes(), digest_size=8)
    digest.update(repr(colors.shape).encode())
    material = [rng_seed, ctx.source_z, ctx.target_z, int.from_bytes(digest.digest(), "little")]
    return np.random.default_rng(np.random.SeedSequence(material))


def oracle_transfer(src_colored: ColoredSection, ctx: TransferContext, eta: float = 0.0, rng_seed: int = 0) -> ColoredSection:
    """Colour each target pixel by the source colour of its ground-truth object.

    When an object carries several colours at the source (it is split across
    seeds), the colour at its first coloured source pixel in raster order is
    used; that pixel does not depend on the digit, so all k predictions pick
    the same seed. Objects absent from the coloured source give 0. Each
    coloured output pixel is then flipped with probability ``eta`` to a
    uniformly chosen other symbol.
    """
    if ctx.gt_source is None or ctx.gt_target is None:
        raise MissingGroundTruth("oracle transfer needs ground truth at source and target")
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must be in [0, 1]")
    colors = np.asarray(src_colored.colors)
    gt_s = np.asarray(ctx.gt_source)
    gt_t = np.asarray(ctx.gt_target)
    if colors.shape != gt_s.shape or gt_t.shape != gt_s.shape:
        raise ValueError("source colours and ground-truth sections must share a shape")

    idx = np.flatnonzero((colors.ravel() > 0) & (gt_s.ravel() > 0))
    out = np.zeros(gt_t.shape, dtype=np.uint8)
    if idx.size:
        objs, first = np.unique(gt_s.ravel()[idx], return_index=True)
        obj_color = colors.ravel()[idx[first]]
        flat_t = gt_t.ravel()
        pos = np.minimum(np.searchsorted(objs, flat_t), len(objs) - 1)
        hit = (objs[pos] == flat_t) & (flat_t > 0)
        out.ravel()[hit] = obj_color[pos[hit]]

    l = src_colored.n_colors
    colored = np.flatnonzero(out.ravel())
    if colored.size and eta > 0:
        rng = _noise_rng(colors, ctx, rng_seed)
        flip = rng.random(colored.size) < eta
        shift = rng.integers(1, l, size=colored.size)
        old = out.ravel()[colored].astype(np.int64)
        new = (old - 1 + shift) % l + 1
        out.ravel()[colored] = np.where(flip, new, old).astype(np.uint8)
    return ColoredSection(ctx.target_z, src_colored.digit_index, out, l)


def geodesic_transfer(src_colored: ColoredSection, ctx: TransferContext, cutoff: float = 1.0) -> ColoredSection:
    """Project source colours onto the target and flood them geodesically.

    Entering a target pixel costs its elevation (a projected source pixel
    pays its own). Each pixel takes the colour of the cheapest source, ties
    going to the lower colour and then the lower raster index of the source.
    Pixels whose cost exceeds ``cutoff`` stay 0.
    """
    if ctx.elev_target is None:
        raise ValueError("geodesic transfer needs the target elevation section")
    if cutoff < 0:
        raise ValueError("cutoff must be >= 0")
    colors = np.asarray(src_colored.colors)
    if colors.shape != np.shape(ctx.elev_target):
        raise ValueError("source colours and target elevation must share a shape")
    out = kernels.geodesic_flood(ctx.elev_target, colors, cutoff)
    return ColoredSection(ctx.target_z, src_colored.digit_index, out, src_colored.n_colors)


@dataclass(frozen=True)
class OracleClassifier:
    eta: float = 0.0
    rng_seed: int = 0

    needs_gt = True
    needs_elevation = False

    def __call__(self, colored: ColoredSection, ctx: TransferContext) -> ColoredSection:
        return oracle_transfer(colored, ctx, self.eta, self.rng_seed)


@dataclass(frozen=True)
class GeodesicClassifier:
    cutoff: float = 1.0

    needs_gt = False
    needs_elevation = True

    def __call__(self, colored: ColoredSection, ctx: TransferContext) -> ColoredSection:
        return geodesic_transfer(colored, ctx, self.cutoff)


CLASSIFIERS = {"oracle": OracleClassifier, "geodesic": GeodesicClassifier}


def make_classifier(name: str, **params) -> DigitClassifier:
    try:
        cls = CLASSIFIERS[name]
    except KeyError:
        raise ConfigError(f"unknown classifier {name!r}; choose from {sorted(CLASSIFIERS)}") from None
    if "cutoff" in params and params["cutoff"] is None:
        params["cutoff"] = math.inf
    try:
        return cls(**params)
    except TypeError as e:
        raise ConfigError(f"bad parameters for classifier {name!r}: {e}") from None


def cross_classify(
    seeds_src: np.ndarray,
    ctx: TransferContext,
    cb: Codebook,
    clf: DigitClassifier,
    policy: DecodePolicy = DecodePolicy(),
) -> np.ndarray:
    """Transfer source seeds to the target section with k classifier calls.

    Decoding only accepts labels present in the source section, so the output
    labels are a subset of the source labels plus 0 even under classifier noise.
    """
    seeds_src = np.asarray(seeds_src)
    if seeds_src.size and seeds_src.max() > cb.n_labels:
        raise LabelOutOfRange(f"seed label {seeds_src.max()} exceeds codebook size {cb.n_labels}")
    preds = []
    for i in range(1, cb.k + 1):
        pred = clf(encode_digit(seeds_src, cb, i, ctx.source_z), ctx)
        preds.append(ColoredSection(ctx.target_z, i, pred.colors, cb.l))
    return decode_pixels(preds, cb, policy, allowed=np.unique(seeds_src))
