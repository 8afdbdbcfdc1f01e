import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import brute_geodesic, brute_minima, brute_window_distinct, component

from crossclass import kernels

BACKENDS = sorted(kernels.IMPLEMENTATIONS)


@pytest.fixture(params=BACKENDS)
def impl(request):
    return kernels.IMPLEMENTATIONS[request.param]


@pytest.mark.skipif(os.environ.get("CROSSCLASS_PURE_PYTHON") == "1", reason="fallback forced")
def test_compiled_backend_is_built():
    assert "cython" in kernels.IMPLEMENTATIONS, "compiled extension missing; run setup.py build_ext --inplace"


def quantized(rng, shape, levels=16):
    return rng.integers(0, levels + 1, size=shape) / levels


@pytest.mark.parametrize("seed", range(12))
def test_minima_match_definition(impl, seed):
    rng = np.random.default_rng(seed)
    values = quantized(rng, (9, 11), levels=8)
    h = [0.0, 0.125, 0.25][seed % 3]
    assert np.array_equal(kernels.minima_markers(values, h, impl=impl), brute_minima(values, h))


def test_minima_on_random_32x32(impl):
    values = quantized(np.random.default_rng(99), (32, 32))
    assert np.array_equal(kernels.minima_markers(values, 0.125, impl=impl), brute_minima(values, 0.125))


def test_constant_plateau_is_one_marker(impl):
    m = kernels.minima_markers(np.full((5, 6), 0.3), 0.0, impl=impl)
    assert (m == 1).all()


def test_two_isolated_minima(impl):
    v = np.ones((7, 7))
    v[1, 1] = v[5, 4] = 0
    m = kernels.minima_markers(v, 0.0, impl=impl)
    assert m.max() == 2 and m[1, 1] == 1 and m[5, 4] == 2 and (m > 0).sum() == 2


def _grow_reference_properties(markers, elev, stop, grown):
    assert (grown[elev >= stop] == 0).all()
    below = elev < stop
    for lab in np.unique(grown[grown > 0]):
        region = grown == lab
        start = tuple(np.argwhere(region)[0])
        assert component(region, start) == frozenset(map(tuple, np.argwhere(region)))
        assert len(np.unique(markers[region & (markers > 0)])) <= 1
    reach = np.zeros_like(below)
    for p in map(tuple, np.argwhere((markers > 0) & below)):
        if not reach[p]:
            for q in component(below, p):
                reach[q] = True
    assert np.array_equal(grown > 0, reach)


@pytest.mark.parametrize("seed", range(10))
def test_priority_flood_properties(impl, seed):
    rng = np.random.default_rng(seed)
    elev = quantized(rng, (14, 15))
    markers = kernels.minima_markers(elev, 0.0625, impl=impl)
    grown = kernels.split_components(kernels.priority_flood(elev, markers, 0.6, impl=impl), impl=impl)
    _grow_reference_properties(markers, elev, 0.6, grown)


def test_flood_stop_zero_is_empty(impl):
    elev = quantized(np.random.default_rng(1), (8, 8))
    markers = kernels.minima_markers(elev, 0.1, impl=impl)
    assert not kernels.priority_flood(elev, markers, 0.0, impl=impl).any()


def test_flood_single_marker_fills_domain(impl):
    elev = np.full((6, 6), 0.4)
    elev[:, 3] = 1.0
    markers = np.zeros((6, 6), np.int32)
    markers[2, 1] = 1
    grown = kernels.priority_flood(elev, markers, 1.0, impl=impl)
    assert (grown[:, :3] == 1).all() and (grown[:, 3:] == 0).all()


def test_split_components_raster_order(impl):
    lab = np.array([[2, 2, 0, 1], [0, 0, 0, 1], [2, 0, 3, 0]], dtype=np.int32)
    out = kernels.split_components(lab, impl=impl)
    assert out.tolist() == [[1, 1, 0, 2], [0, 0, 0, 2], [3, 0, 4, 0]]


@pytest.mark.parametrize("seed", range(15))
def test_geodesic_matches_bruteforce(impl, seed):
    rng = np.random.default_rng(seed)
    elev = rng.integers(0, 9, size=(7, 8)) / 64
    colors = np.where(rng.random((7, 8)) < 0.12, rng.integers(1, 4, size=(7, 8)), 0).astype(np.uint8)
    cutoff = [np.inf, 0.25, 0.0][seed % 3]
    assert np.array_equal(kernels.geodesic_flood(elev, colors, cutoff, impl=impl), brute_geodesic(elev, colors, cutoff))


def test_geodesic_zero_cutoff_keeps_zero_elevation_sources(impl):
    elev = np.zeros((4, 4))
    elev[0, 0] = 0.5
    colors = np.zeros((4, 4), np.uint8)
    colors[0, 0], colors[3, 3] = 1, 2
    out = kernels.geodesic_flood(elev, colors, 0.0, impl=impl)
    assert out[0, 0] == 0 and out[3, 3] == 2
    assert (out[1:, 1:] == 2).all()


def test_geodesic_voronoi_on_flat_elevation(impl):
    elev = np.full((1, 9), 1 / 64)
    colors = np.zeros((1, 9), np.uint8)
    colors[0, 0], colors[0, 8] = 1, 2
    out = kernels.geodesic_flood(elev, colors, np.inf, impl=impl)
    # the centre is equidistant; the lower colour wins
    assert out.tolist() == [[1, 1, 1, 1, 1, 2, 2, 2, 2]]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 4))
def test_window_distinct_matches_bruteforce(seed, radius):
    rng = np.random.default_rng(seed)
    lab = rng.integers(0, 6, size=(9, 10)).astype(np.uint32)
    expected = brute_window_distinct(lab, radius)
    for impl in kernels.IMPLEMENTATIONS.values():
        assert np.array_equal(kernels.window_distinct_count(lab, radius, impl=impl), expected)


@pytest.mark.skipif(len(BACKENDS) < 2, reason="needs both backends")
@pytest.mark.parametrize("seed", range(20))
def test_backends_agree_on_synthetic_sections(seed):
    rng = np.random.default_rng(seed)
    elev = rng.random((40, 37))
    py, cy = kernels.IMPLEMENTATIONS["python"], kernels.IMPLEMENTATIONS["cython"]
    m_py = kernels.minima_markers(elev, 0.05, impl=py)
    assert np.array_equal(m_py, kernels.minima_markers(elev, 0.05, impl=cy))
    assert np.array_equal(kernels.priority_flood(elev, m_py, 0.7, impl=py), kernels.priority_flood(elev, m_py, 0.7, impl=cy))
    colors = np.where(rng.random(elev.shape) < 0.05, rng.integers(1, 5, elev.shape), 0)
    assert np.array_equal(
        kernels.geodesic_flood(elev, colors, 2.0, impl=py), kernels.geodesic_flood(elev, colors, 2.0, impl=cy)
    )


def test_pure_python_backend_can_be_forced():
    import subprocess
    import sys

    env = dict(os.environ, CROSSCLASS_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from crossclass import kernels; print(kernels.BACKEND, sorted(kernels.IMPLEMENTATIONS))"],
        capture_output=True, text=True, env=env, check=True,
    )
    assert out.stdout.split()[0] == "python"
