"""Backend selection for the per-pixel kernels.

The compiled ``_ckernels`` extension is used when importable; otherwise, or
when ``CROSSCLASS_PURE_PYTHON=1`` is set, the ``_pykernels`` fallback is
used. ``BACKEND`` names the active implementation. Wrappers normalise dtypes
and memory layout so both backends see identical inputs.
"""
import os

import numpy as np

from . import _pykernels

try:
    if os.environ.get("CROSSCLASS_PURE_PYTHON") == "1":
        raise ImportError("pure-Python backend forced")
    from . import _ckernels as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"

IMPLEMENTATIONS = {"python": _pykernels}
if BACKEND == "cython":
    IMPLEMENTATIONS["cython"] = _impl


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def minima_markers(values, h, impl=None):
    """Markers: components D of {v <= min(D) + h}, 4-connected, raster numbered."""
    values = _f64(values)
    order = np.argsort(values, axis=None, kind="stable").astype(np.int64)
    return (impl or _impl).minima_markers(values, order, float(h))


def priority_flood(elev, markers, stop, impl=None):
    return (impl or _impl).priority_flood(
        _f64(elev), np.ascontiguousarray(markers, dtype=np.int32), float(stop)
    )


def split_components(labels, impl=None):
    return (impl or _impl).split_components(np.ascontiguousarray(labels, dtype=np.int32))


def geodesic_flood(elev, src_colors, cutoff, impl=None):
    return (impl or _impl).geodesic_flood(
        _f64(elev), np.ascontiguousarray(src_colors, dtype=np.uint8), float(cutoff)
    )


def window_distinct_count(labels, radius, impl=None):
    return (impl or _impl).window_distinct_count(
        np.ascontiguousarray(labels, dtype=np.uint32), int(radius)
    )
