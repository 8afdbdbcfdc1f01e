import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import brute_rand, brute_vi

from crossclass.errors import EmptyTable, ShapeMismatch
from crossclass.metrics import adapted_rand_error, contingency, evaluate, variation_of_information


def test_identical_gives_diagonal_table():
    a = np.array([1, 1, 2, 3, 3, 3])
    t = contingency(a, a)
    assert np.array_equal(t.rows, t.cols) and t.counts.tolist() == [2, 1, 3]
    assert adapted_rand_error(t) == (0.0, 1.0, 1.0)
    assert variation_of_information(t) == (0.0, 0.0, 0.0)


def test_single_row_two_halves():
    t = contingency(np.ones(8, int), np.repeat([1, 2], 4))
    assert t.counts.tolist() == [4, 4] and len(set(t.rows.tolist())) == 1


def test_split_each_object_in_half():
    gt = np.repeat([1, 2], 8)
    pred = np.repeat([1, 2, 3, 4], 4)
    err, prec, rec = adapted_rand_error(contingency(pred, gt))
    assert prec == 1.0 and rec == 0.5 and err == pytest.approx(1 / 3, abs=1e-15)


def test_merge_costs_one_bit():
    vi, split, merge = variation_of_information(contingency(np.ones(8, int), np.repeat([1, 2], 4)))
    assert split == 0 and merge == pytest.approx(1.0)


def test_split_costs_one_bit():
    vi, split, merge = variation_of_information(contingency(np.repeat([1, 2], 4), np.ones(8, int)))
    assert merge == 0 and split == pytest.approx(1.0)


def test_background_handling():
    gt = np.array([0, 0, 1, 1])
    pred = np.array([5, 5, 0, 0])
    t = contingency(pred, gt)
    assert t.total == 2 and t.counts.tolist() == [1, 1]
    assert contingency(pred, gt, ignore_background=False).total == 4


def test_errors():
    with pytest.raises(ShapeMismatch):
        contingency(np.zeros(3), np.zeros(4))
    with pytest.raises(EmptyTable):
        adapted_rand_error(contingency(np.ones(3), np.zeros(3)))
    with pytest.raises(EmptyTable):
        variation_of_information(contingency(np.ones(3), np.zeros(3)))


def test_random_table_matches_tally():
    rng = np.random.default_rng(0)
    pred, gt = rng.integers(1, 5, (10, 10)), rng.integers(0, 5, (10, 10))
    t = contingency(pred, gt)
    got = {(r, c): n for r, c, n in zip(t.rows.tolist(), t.cols.tolist(), t.counts.tolist())}
    want = {}
    for p, g in zip(pred.ravel().tolist(), gt.ravel().tolist()):
        if g:
            want[(p, g)] = want.get((p, g), 0) + 1
    assert got == want


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 120))
def test_against_bruteforce(seed, n):
    rng = np.random.default_rng(seed)
    pred = rng.integers(0, 6, n)
    gt = rng.integers(0, 5, n)
    gt[0] = 1
    for bg in (True, False):
        t = contingency(pred, gt, bg)
        assert np.allclose(adapted_rand_error(t), brute_rand(pred, gt, bg), atol=1e-12, rtol=0)
        assert np.allclose(variation_of_information(t), brute_vi(pred, gt, bg), atol=1e-12, rtol=0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_relabel_invariance_and_symmetry(seed):
    rng = np.random.default_rng(seed)
    pred, gt = rng.integers(1, 6, 80), rng.integers(1, 5, 80)
    perm_p, perm_g = rng.permutation(10) + 1, rng.permutation(10) + 1
    base = evaluate(pred, gt)
    moved = evaluate(perm_p[pred], perm_g[gt])
    assert all(base[k] == pytest.approx(moved[k], abs=1e-12) for k in base)
    swap = evaluate(gt, pred)
    assert swap["precision"] == pytest.approx(base["recall"]) and swap["vi_split"] == pytest.approx(base["vi_merge"])
    assert swap["rand_error"] == pytest.approx(base["rand_error"]) and swap["vi"] == pytest.approx(base["vi"])


def test_seeded_only_drops_unlabelled_voxels():
    gt = np.array([1, 1, 2, 2])
    pred = np.array([3, 3, 0, 0])
    assert evaluate(pred, gt)["rand_error"] > 0
    assert evaluate(pred, gt, seeded_only=True)["rand_error"] == 0
