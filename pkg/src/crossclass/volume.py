"""Section stacks and the VOL1 on-disk format.

A stack is a z-major ``(z, y, x)`` numpy array wrapped in a small immutable
container. Label stacks hold non-negative integers with 0 reserved for
background; scalar stacks hold border probabilities in [0, 1].

VOL1 layout (all little-endian)::

    bytes 0-3    b"VOL1"
    byte  4      dtype code: 0=u8, 1=u16, 2=u32, 3=f32
    bytes 5-7    zero padding
    bytes 8-19   u32 z, u32 y, u32 x
    bytes 20-    z*y*x values, z-major then row-major
"""
from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .errors import (
    BadMagic,
    DimsOverflow,
    InvariantViolation,
    TruncatedFile,
    UnsupportedDtype,
    VolFormatError,
)

MAGIC = b"VOL1"
HEADER = struct.Struct("<4sB3xIII")
HEADER_SIZE = HEADER.size  # 20
MAX_VOXELS = 2**32 - 1

DTYPE_BY_CODE = {
    0: np.dtype("<u1"),
    1: np.dtype("<u2"),
    2: np.dtype("<u4"),
    3: np.dtype("<f4"),
}
CODE_BY_DTYPE = {dt: code for code, dt in DTYPE_BY_CODE.items()}
LABEL_DTYPES = (np.dtype("<u1"), np.dtype("<u2"), np.dtype("<u4"))


@dataclass(frozen=True)
class Dims:
    z: int
    y: int
    x: int

    def __post_init__(self):
        for name in ("z", "y", "x"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise InvariantViolation(f"Dims.{name} must be a positive integer, got {v!r}")

    @property
    def voxels(self) -> int:
        return self.z * self.y * self.x

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.z, self.y, self.x)

    def check(self, max_voxels: int = MAX_VOXELS) -> None:
        if self.voxels > max_voxels:
            raise DimsOverflow(f"{self.shape} has {self.voxels} voxels, limit is {max_voxels}")


def _readonly(a: np.ndarray) -> np.ndarray:
    v = a.view()
    v.flags.writeable = False
    return v


class _Stack:
    data: np.ndarray

    @property
    def dims(self) -> Dims:
        return Dims(*self.data.shape)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    def section(self, z: int) -> np.ndarray:
        if not 0 <= z < self.data.shape[0]:
            raise IndexError(f"section {z} out of range for {self.data.shape[0]} sections")
        return self.data[z]

    def __len__(self) -> int:
        return self.data.shape[0]

    def __eq__(self, other) -> bool:
        if type(other) is not type(self):
            return NotImplemented
        return self.data.dtype == other.data.dtype and np.array_equal(self.data, other.data)

    __hash__ = None


class LabelStack(_Stack):
    """Integer labels per voxel, stored as u8, u16 or u32."""

    def __init__(self, data):
        a = np.asarray(data)
        if a.ndim != 3:
            raise InvariantViolation(f"label stack must be 3-D, got shape {a.shape}")
        Dims(*a.shape)
        if a.dtype.newbyteorder("<") not in LABEL_DTYPES:
            if a.dtype.kind not in "iub":
                raise InvariantViolation(f"label stack needs an integer dtype, got {a.dtype}")
            if a.size and (a.min() < 0 or a.max() > np.iinfo(np.uint32).max):
                raise InvariantViolation("labels must lie in [0, 2**32 - 1]")
            a = a.astype(np.uint32)
        elif a.dtype.byteorder == ">":
            a = a.astype(a.dtype.newbyteorder("<"))
        self.data = _readonly(a)

    def __repr__(self):
        return f"LabelStack(shape={self.shape}, dtype={self.dtype})"


class ScalarStack(_Stack):
    """Border/elevation probabilities per voxel, stored as f32."""

    def __init__(self, data):
        a = np.asarray(data)
        if a.ndim != 3:
            raise InvariantViolation(f"scalar stack must be 3-D, got shape {a.shape}")
        Dims(*a.shape)
        self.data = _readonly(a.astype("<f4", copy=False))

    def validate(self) -> None:
        """Raise InvariantViolation unless every value is finite and in [0, 1]."""
        a = self.data
        if not np.all(np.isfinite(a)):
            raise InvariantViolation("scalar stack contains non-finite values")
        if a.size and (a.min() < 0.0 or a.max() > 1.0):
            raise InvariantViolation("scalar stack values must lie in [0, 1]")

    def __repr__(self):
        return f"ScalarStack(shape={self.shape})"


Stack = Union[LabelStack, ScalarStack]


def _read_header(f, path, max_voxels: int) -> tuple[np.dtype, Dims]:
    raw = f.read(HEADER_SIZE)
    if len(raw) >= 4 and raw[:4] != MAGIC:
        raise BadMagic(f"{path}: expected magic {MAGIC!r}, found {raw[:4]!r}")
    if len(raw) < HEADER_SIZE:
        raise TruncatedFile(f"{path}: header is {len(raw)} bytes, need {HEADER_SIZE}")
    magic, code, z, y, x = HEADER.unpack(raw)
    if raw[5:8] != b"\0\0\0":
        raise VolFormatError(f"{path}: non-zero header padding")
    if code not in DTYPE_BY_CODE:
        raise UnsupportedDtype(f"{path}: dtype code {code}")
    if min(z, y, x) < 1:
        raise VolFormatError(f"{path}: zero-sized dimension {(z, y, x)}")
    dims = Dims(z, y, x)
    dims.check(max_voxels)
    return DTYPE_BY_CODE[code], dims


def load_stack(path, max_voxels: int = MAX_VOXELS) -> Stack:
    """Read a VOL1 file. dtype code 3 gives a ScalarStack, 0-2 a LabelStack."""
    path = Path(path)
    with open(path, "rb") as f:
        dtype, dims = _read_header(f, path, max_voxels)
        data = np.fromfile(f, dtype=dtype, count=dims.voxels)
        if data.size < dims.voxels:
            raise TruncatedFile(f"{path}: {data.size} of {dims.voxels} values present")
        if f.read(1):
            raise VolFormatError(f"{path}: trailing bytes after {dims.voxels} values")
    data = data.reshape(dims.shape)
    if dtype == DTYPE_BY_CODE[3]:
        return ScalarStack(data)
    return LabelStack(data)


def _encode_header(dtype: np.dtype, shape) -> bytes:
    return HEADER.pack(MAGIC, CODE_BY_DTYPE[np.dtype(dtype).newbyteorder("<")], *shape)


def save_stack(stack: Stack, path) -> None:
    """Write ``stack`` as VOL1. The file appears atomically (temp file + rename)."""
    if isinstance(stack, ScalarStack):
        stack.validate()
    elif not isinstance(stack, LabelStack):
        raise TypeError(f"expected LabelStack or ScalarStack, got {type(stack).__name__}")
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(_encode_header(stack.dtype, stack.shape))
            np.ascontiguousarray(stack.data).tofile(f)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class VolReader:
    """Random access to single sections of a VOL1 file without loading the stack."""

    def __init__(self, path, max_voxels: int = MAX_VOXELS):
        self.path = Path(path)
        self._f = open(self.path, "rb")
        try:
            self.dtype, self.dims = _read_header(self._f, self.path, max_voxels)
            expected = HEADER_SIZE + self.dims.voxels * self.dtype.itemsize
            actual = os.fstat(self._f.fileno()).st_size
            if actual < expected:
                raise TruncatedFile(f"{self.path}: {actual} bytes, need {expected}")
        except BaseException:
            self._f.close()
            raise

    @property
    def is_scalar(self) -> bool:
        return self.dtype == DTYPE_BY_CODE[3]

    def read_section(self, z: int) -> np.ndarray:
        d = self.dims
        if not 0 <= z < d.z:
            raise IndexError(f"section {z} out of range for {d.z} sections")
        n = d.y * d.x
        self._f.seek(HEADER_SIZE + z * n * self.dtype.itemsize)
        a = np.fromfile(self._f, dtype=self.dtype, count=n)
        if a.size < n:
            raise TruncatedFile(f"{self.path}: section {z} is short")
        return a.reshape(d.y, d.x)

    def close(self):
        self._f.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class VolWriter:
    """Sequential section-by-section VOL1 writer."""

    def __init__(self, path, dims: Dims, dtype):
        self.path = Path(path)
        self.dims = dims
        self.dtype = np.dtype(dtype).newbyteorder("<")
        if self.dtype not in CODE_BY_DTYPE:
            raise UnsupportedDtype(str(dtype))
        self._next = 0
        self._f = open(self.path, "wb")
        self._f.write(_encode_header(self.dtype, dims.shape))

    def write_section(self, z: int, section: np.ndarray) -> None:
        if z != self._next:
            raise ValueError(f"sections must be written in order; expected {self._next}, got {z}")
        if section.shape != (self.dims.y, self.dims.x):
            raise InvariantViolation(f"section shape {section.shape} != {(self.dims.y, self.dims.x)}")
        np.ascontiguousarray(section, dtype=self.dtype).tofile(self._f)
        self._next += 1

    def close(self) -> None:
        if self._f.closed:
            return
        self._f.close()
        if self._next != self.dims.z:
            raise InvariantViolation(f"{self.path}: wrote {self._next} of {self.dims.z} sections")

    def __enter__(self):
        return self

    def __exit__(self, exc_type, *exc):
        if exc_type is None:
            self.close()
        else:
            self._f.close()


def first_occurrence_order(a: np.ndarray) -> np.ndarray:
    """Distinct nonzero values of ``a`` in order of first appearance (C order)."""
    flat = np.ravel(a)
    uniq, first = np.unique(flat, return_index=True)
    keep = uniq != 0
    uniq, first = uniq[keep], first[keep]
    return uniq[np.argsort(first, kind="stable")]


def relabel(a: np.ndarray, old: np.ndarray, dtype=None) -> np.ndarray:
    """Map ``old[i] -> i + 1`` and 0 -> 0; every nonzero value of ``a`` must be in ``old``."""
    out = np.zeros(a.shape, dtype=dtype or a.dtype)
    if old.size == 0:
        return out
    order = np.argsort(old, kind="stable")
    sorted_old = old[order]
    nz = a != 0
    pos = np.searchsorted(sorted_old, a[nz])
    out[nz] = (order[pos] + 1).astype(out.dtype)
    return out


def compact_labels(stack: LabelStack) -> tuple[LabelStack, dict[int, int]]:
    """Renumber nonzero labels to 1..N in first-occurrence (z-major) order."""
    old = first_occurrence_order(stack.data)
    mapping = {int(o): i + 1 for i, o in enumerate(old)}
    return LabelStack(relabel(stack.data, old)), mapping
