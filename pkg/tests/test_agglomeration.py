import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crossclass.agglomeration import (
    MergeConfig,
    OverlapEdge,
    Partition,
    finalize,
    merge_components,
    overlap_edges,
    read_edges,
    resolve_orphans,
    write_edges,
)
from crossclass.errors import ConfigError, ShapeMismatch
from crossclass.seeding import SeedVolume
from crossclass.volume import LabelStack


def E(i, j, w, ov=1, sz=0, dz=1):
    return OverlapEdge(sz, i, dz, j, ov, w)


def test_merge_config_validation():
    with pytest.raises(ConfigError):
        MergeConfig(window=0)
    with pytest.raises(ConfigError):
        MergeConfig(threshold=0)
    assert MergeConfig().window == 2 and MergeConfig().threshold == 0.1


def test_full_cover_weight_one():
    pred = np.array([[0, 4, 4], [0, 4, 4]])
    tgt = np.array([[0, 9, 9], [0, 9, 9]])
    assert overlap_edges(pred, tgt, 0, 1) == [OverlapEdge(0, 4, 1, 9, 4, 1.0)]


def test_disjoint_gives_no_edges():
    assert overlap_edges(np.array([[1, 0]]), np.array([[0, 2]])) == []


def test_quarter_cover_weight():
    tgt = np.zeros((4, 4), int)
    tgt[:3, :] = 5
    pred = np.zeros((4, 4), int)
    pred[0, :3] = 2
    pred[3, :] = 2
    (edge,) = overlap_edges(pred, tgt)
    assert edge.overlap_pixels == 3 and edge.weight == 0.25


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31))
def test_overlap_edges_brute_force(seed):
    rng = np.random.default_rng(seed)
    pred = rng.integers(0, 4, (6, 7))
    tgt = rng.integers(0, 4, (6, 7))
    got = {(e.src_seed, e.dst_seed): (e.overlap_pixels, e.weight) for e in overlap_edges(pred, tgt)}
    want = {}
    for i in range(1, 4):
        for j in range(1, 4):
            ov = int(((pred == i) & (tgt == j)).sum())
            if ov:
                want[(i, j)] = (ov, ov / (tgt == j).sum())
    assert got == want


def test_overlap_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        overlap_edges(np.zeros((2, 2)), np.zeros((2, 3)))


def test_strict_threshold():
    assert merge_components([E(1, 2, 0.1)], 0.1, 2).n_components() == 2
    assert merge_components([E(1, 2, 0.1000001)], 0.1, 2).n_components() == 1


def test_chain_of_strong_edges():
    p = merge_components([E(1, 2, 0.9), E(2, 3, 0.9)], 0.1, 3)
    assert p.n_components() == 1 and p.canonical().tolist() == [0, 1, 1, 1]


def test_no_strong_edges_gives_singletons():
    p = merge_components([E(1, 2, 0.05)], 0.1, 4)
    assert p.canonical().tolist() == [0, 1, 2, 3, 4]


def _random_edges(rng, n, m):
    return [E(int(rng.integers(1, n + 1)), int(rng.integers(1, n + 1)), float(rng.random())) for _ in range(m)]


@pytest.mark.parametrize("seed", range(5))
def test_monotone_in_threshold(seed):
    rng = np.random.default_rng(seed)
    edges = _random_edges(rng, 30, 40)
    counts = [merge_components(edges, t, 30).n_components() for t in (0.9, 0.5, 0.2, 0.05)]
    assert counts == sorted(counts, reverse=True)


def test_orphans_unchanged_when_all_large():
    p = merge_components([], 0.1, [0, 300, 400])
    assert resolve_orphans(p, [E(1, 2, 0.05)], 200).same_as(p)


def test_orphan_goes_to_best_edge():
    # seeds: 1 = A (500), 2 = B (500), 3 = orphan (5)
    p = merge_components([], 0.1, [0, 500, 500, 5])
    out = resolve_orphans(p, [E(3, 1, 0.05), E(3, 2, 0.08)], 100)
    assert out.find(3) == out.find(2) and out.find(1) != out.find(2)


def test_orphan_tie_breaks():
    p = merge_components([], 0.1, [0, 500, 500, 5])
    out = resolve_orphans(p, [E(3, 1, 0.05, ov=4), E(3, 2, 0.05, ov=2)], 100)
    assert out.find(3) == out.find(1)
    out = resolve_orphans(p, [E(3, 2, 0.05, ov=2), E(3, 1, 0.05, ov=2)], 100)
    assert out.find(3) == out.find(1)


def test_isolated_orphan_stays():
    p = merge_components([], 0.1, [0, 500, 5])
    assert resolve_orphans(p, [], 100).n_components() == 2


@pytest.mark.parametrize("seed", range(10))
def test_orphans_never_join_two_large_components(seed):
    rng = np.random.default_rng(seed)
    sizes = np.concatenate([[0], rng.integers(1, 300, 25)])
    edges = _random_edges(rng, 25, 60)
    base = merge_components(edges, 0.5, sizes)
    out = resolve_orphans(base, edges, 150)
    large = [r for r in set(base.roots()[1:]) if base.size[r] >= 150]
    assert len({out.find(int(r)) for r in large}) == len(large)
    assert base.n_components() - out.n_components() <= 25


def test_finalize_identity_and_all_in_one():
    seeds = np.array([[[0, 3, 3], [1, 0, 2]]], dtype=np.uint32)
    sv = SeedVolume(LabelStack(seeds), np.array([-1, 0, 0, 0]), np.array([0, 1, 1, 2]))
    ident = finalize(sv, Partition(sv.sizes))
    assert ident.data.tolist() == [[[0, 1, 1], [2, 0, 3]]]
    one = Partition(sv.sizes)
    one.union(1, 2)
    one.union(2, 3)
    assert finalize(sv, one).data.tolist() == [[[0, 1, 1], [1, 0, 1]]]


def test_edge_dump_roundtrip():
    edges = [OverlapEdge(0, 1, 2, 7, 13, 0.125), OverlapEdge(3, 4, 1, 2, 1, 1 / 3)]
    buf = io.StringIO()
    write_edges(edges, buf)
    assert buf.getvalue().splitlines()[0] == "0\t1\t2\t7\t13\t0.125"
    back = read_edges(io.StringIO(buf.getvalue()))
    assert [(e.src_seed, e.dst_seed, e.overlap_pixels) for e in back] == [(1, 7, 13), (4, 2, 1)]
    assert back[1].weight == pytest.approx(1 / 3, rel=1e-8)
