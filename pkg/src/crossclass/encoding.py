"""Combinatorial label encoding.

Labels 1..N are mapped to distinct random length-k strings over the alphabet
{1..l} (0 stays background). A labelled section then becomes k images with l
colours each; decoding reads the per-pixel k-tuple back through the inverse
table.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import CapacityExceeded, LabelOutOfRange, MissingDigit, ShapeMismatch

HEADER_TAG = "3C-CODEBOOK"
_MAX_KEY = 2**62


def min_digits(n: int, l: int) -> int:
    """Smallest k >= 1 with l**k >= n."""
    if n < 1 or l < 2:
        raise ValueError(f"need n >= 1 and l >= 2, got n={n}, l={l}")
    k, cap = 1, l
    while cap < n:
        k += 1
        cap *= l
    return k


@dataclass(frozen=True, eq=False)
class Codebook:
    """Injective map label -> k-tuple over {1..l}.

    ``codes[m - 1]`` is the codeword of label m (uint8, values 1..l).
    """

    codes: np.ndarray
    l: int
    rng_seed: int | None = None

    def __post_init__(self):
        codes = np.ascontiguousarray(self.codes, dtype=np.uint8)
        if codes.ndim != 2 or codes.shape[1] < 1:
            raise ValueError("codes must be an (N, k) array with k >= 1")
        if self.l < 2 or self.l > 255:
            raise ValueError("alphabet size must be in [2, 255]")
        if codes.size and (codes.min() < 1 or codes.max() > self.l):
            raise ValueError(f"code symbols must lie in 1..{self.l}")
        if self.l ** codes.shape[1] > _MAX_KEY:
            raise ValueError("codeword space too large for integer keys")
        codes.flags.writeable = False
        object.__setattr__(self, "codes", codes)
        keys = _keys(codes, self.l)
        order = np.argsort(keys, kind="stable")
        if np.any(np.diff(keys[order]) == 0):
            raise ValueError("codewords are not distinct")
        object.__setattr__(self, "_sorted_keys", keys[order])
        object.__setattr__(self, "_sorted_labels", (order + 1).astype(np.int64))

    @property
    def n_labels(self) -> int:
        return self.codes.shape[0]

    @property
    def k(self) -> int:
        return self.codes.shape[1]

    @property
    def capacity(self) -> int:
        return self.l**self.k

    def code(self, label: int) -> tuple[int, ...]:
        if not 1 <= label <= self.n_labels:
            raise LabelOutOfRange(f"label {label} not in 1..{self.n_labels}")
        return tuple(int(c) for c in self.codes[label - 1])

    def inverse(self, word: Sequence[int]) -> int:
        """Label for ``word``, or 0 if it is not a codeword."""
        word = np.asarray(word, dtype=np.int64)
        if word.shape != (self.k,) or np.any(word < 1) or np.any(word > self.l):
            return 0
        return int(self.lookup(_keys(word[None, :], self.l))[0])

    def lookup(self, keys: np.ndarray) -> np.ndarray:
        """Vectorised inverse on integer keys; unknown keys give 0."""
        if len(self._sorted_keys) == 0:
            return np.zeros(keys.shape, dtype=np.int64)
        pos = np.searchsorted(self._sorted_keys, keys)
        pos = np.minimum(pos, len(self._sorted_keys) - 1)
        hit = self._sorted_keys[pos] == keys
        return np.where(hit, self._sorted_labels[pos], 0)

    def min_hamming(self) -> int:
        """Smallest pairwise Hamming distance between codewords (k+1 if N < 2)."""
        c = self.codes.astype(np.int16)
        best = self.k + 1
        for i in range(len(c) - 1):
            d = (c[i + 1 :] != c[i]).sum(axis=1)
            if d.size:
                best = min(best, int(d.min()))
        return best

    def permuted(self, perm: Sequence[int]) -> "Codebook":
        """Codebook giving label m the codeword previously held by label perm[m-1]."""
        perm = np.asarray(perm, dtype=np.int64)
        return Codebook(self.codes[perm - 1], self.l, self.rng_seed)

    def save(self, path) -> None:
        seed = -1 if self.rng_seed is None else self.rng_seed
        lines = [f"{HEADER_TAG} {self.n_labels} {self.l} {self.k} {seed}"]
        lines += [f"{m} " + " ".join(str(int(d)) for d in row) for m, row in enumerate(self.codes, start=1)]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> "Codebook":
        rows = Path(path).read_text().split("\n")
        head = rows[0].split()
        if len(head) != 5 or head[0] != HEADER_TAG:
            raise ValueError(f"{path}: not a codebook file")
        n, l, k, seed = (int(t) for t in head[1:])
        codes = np.zeros((n, k), dtype=np.uint8)
        seen = set()
        for row in rows[1:]:
            if not row.strip():
                continue
            parts = [int(t) for t in row.split()]
            if len(parts) != k + 1 or not 1 <= parts[0] <= n:
                raise ValueError(f"{path}: bad codebook line {row!r}")
            codes[parts[0] - 1] = parts[1:]
            seen.add(parts[0])
        if len(seen) != n:
            raise ValueError(f"{path}: expected {n} codewords, found {len(seen)}")
        return cls(codes, l, None if seed < 0 else seed)


def _keys(codes: np.ndarray, l: int) -> np.ndarray:
    """Integer key sum((d_i - 1) * l**(i-1)) for rows of symbols in 1..l."""
    k = codes.shape[-1]
    weights = l ** np.arange(k, dtype=np.int64)
    return ((codes.astype(np.int64) - 1) * weights).sum(axis=-1)


def build_codebook(n: int, l: int, k: int, rng_seed: int = 0) -> Codebook:
    """N distinct uniformly random codewords by rejection sampling."""
    if l < 2:
        raise ValueError("alphabet size must be >= 2")
    if k < 1:
        raise ValueError("k must be >= 1")
    if n < 0:
        raise ValueError("n must be >= 0")
    if l**k < n:
        raise CapacityExceeded(f"{l}**{k} = {l**k} < {n} labels")
    rng = np.random.default_rng(rng_seed)
    accepted: list[np.ndarray] = []
    seen: set[int] = set()
    weights = l ** np.arange(k, dtype=np.int64)
    count = 0
    while count < n:
        batch = rng.integers(1, l + 1, size=(max(64, 2 * (n - count)), k), dtype=np.int64)
        keys = ((batch - 1) * weights).sum(axis=1)
        for row, key in zip(batch, keys.tolist()):
            if key in seen:
                continue
            seen.add(key)
            accepted.append(row)
            count += 1
            if count == n:
                break
    codes = np.array(accepted, dtype=np.uint8).reshape(n, k)
    return Codebook(codes, l, rng_seed)


@dataclass(frozen=True)
class ColoredSection:
    """One digit image: symbols in {0..l} per pixel, 0 = background."""

    z: int
    digit_index: int
    colors: np.ndarray
    n_colors: int


@dataclass(frozen=True)
class DecodePolicy:
    mode: str = "strict"
    max_hamming: int = 0

    def __post_init__(self):
        if self.mode not in ("strict", "nearest"):
            raise ValueError(f"decode mode must be 'strict' or 'nearest', got {self.mode!r}")
        if self.max_hamming < 0:
            raise ValueError("max_hamming must be >= 0")

    def check(self, k: int) -> None:
        if self.max_hamming >= k:
            raise ValueError(f"max_hamming={self.max_hamming} must be < k={k}")


def encode_digit(section: np.ndarray, cb: Codebook, i: int, z: int = 0) -> ColoredSection:
    """Colour image for digit ``i`` (1-based): label m -> i-th symbol of code(m)."""
    if not 1 <= i <= cb.k:
        raise ValueError(f"digit index {i} not in 1..{cb.k}")
    section = np.asarray(section)
    if section.size and (section.min() < 0 or section.max() > cb.n_labels):
        raise LabelOutOfRange(f"labels must lie in 0..{cb.n_labels}")
    table = np.concatenate([[0], cb.codes[:, i - 1]]).astype(np.uint8)
    return ColoredSection(z, i, table[section.astype(np.int64)], cb.l)


def encode_all(section: np.ndarray, cb: Codebook, z: int = 0) -> list[ColoredSection]:
    return [encode_digit(section, cb, i, z) for i in range(1, cb.k + 1)]


def decode_pixels(
    digits: Sequence[ColoredSection],
    cb: Codebook,
    policy: DecodePolicy = DecodePolicy(),
    allowed: np.ndarray | None = None,
) -> np.ndarray:
    """Per-pixel inverse of the encoding.

    A tuple with any 0 digit decodes to 0. A tuple that is not a codeword
    decodes to 0 in strict mode; in nearest mode it decodes to the single
    codeword within ``max_hamming`` of it, or 0 if there are none or several.
    ``allowed`` restricts the candidate labels; other codewords count as
    invalid.
    """
    policy.check(cb.k)
    by_index = {d.digit_index: d for d in digits}
    if sorted(by_index) != list(range(1, cb.k + 1)) or len(digits) != cb.k:
        raise MissingDigit(f"need digit images 1..{cb.k}, got {sorted(d.digit_index for d in digits)}")
    shape = by_index[1].colors.shape
    for d in digits:
        if d.colors.shape != shape:
            raise ShapeMismatch(f"digit {d.digit_index} has shape {d.colors.shape}, expected {shape}")
    stack = np.stack([by_index[i].colors for i in range(1, cb.k + 1)], axis=-1).astype(np.int64)
    valid = np.all((stack >= 1) & (stack <= cb.l), axis=-1)
    out = np.zeros(shape, dtype=np.int64)
    if not valid.any():
        return out
    words = stack[valid]
    labels = cb.lookup(_keys(words, cb.l))
    if allowed is not None:
        allowed = np.unique(np.asarray(allowed, dtype=np.int64))
        allowed = allowed[(allowed >= 1) & (allowed <= cb.n_labels)]
        labels[~np.isin(labels, allowed)] = 0
    if policy.mode == "nearest" and policy.max_hamming > 0:
        miss = labels == 0
        if miss.any():
            labels[miss] = _nearest(words[miss], cb, policy.max_hamming, allowed)
    out[valid] = labels
    return out


def _nearest(words: np.ndarray, cb: Codebook, radius: int, allowed: np.ndarray | None = None) -> np.ndarray:
    uniq, inv = np.unique(words, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    candidates = np.arange(1, cb.n_labels + 1) if allowed is None else allowed
    result = np.zeros(len(uniq), dtype=np.int64)
    if len(candidates) == 0:
        return result[inv]
    codes = cb.codes[candidates - 1].astype(np.int64)
    chunk = max(1, 2_000_000 // max(1, codes.size))
    for s in range(0, len(uniq), chunk):
        block = uniq[s : s + chunk]
        dist = (block[:, None, :] != codes[None, :, :]).sum(axis=2)
        within = dist <= radius
        hits = within.sum(axis=1)
        first = np.argmax(within, axis=1)
        result[s : s + chunk] = np.where(hits == 1, candidates[first], 0)
    return result[inv]
