import numpy as np
import pytest
from oracles import brute_window_distinct

from crossclass.costmodel import (
    CostConfig,
    call_counts,
    cost_rows,
    object_density_map,
    pipeline_calls,
    ratio_curve,
    revisits,
    transfer_pairs,
)
from crossclass.encoding import min_digits
from crossclass.errors import ConfigError, RhoZero
from crossclass.volume import LabelStack


def test_config_validation():
    with pytest.raises(ConfigError):
        CostConfig(fov=4)
    with pytest.raises(RhoZero):
        CostConfig(rho=0)
    with pytest.raises(ConfigError):
        CostConfig(rho=1.5)


def test_single_object_density():
    lab = np.zeros((2, 20, 20), np.uint32)
    lab[:, 5:9, 5:9] = 1
    d = object_density_map(LabelStack(lab), 5)
    assert set(np.unique(d).tolist()) == {0, 1}


def test_checkerboard_density():
    lab = (np.indices((9, 9)).sum(axis=0) % 2 + 1).astype(np.uint32)[None]
    assert (object_density_map(lab, 3) == 2).all()


def test_density_matches_bruteforce(small_stack):
    _, gt, _ = small_stack
    d = object_density_map(gt, 9)
    for z in (0, 4, 7):
        assert np.array_equal(d[z], brute_window_distinct(np.asarray(gt.data[z]), 4))


def test_unit_case():
    cm = call_counts(np.ones((4, 4), int), CostConfig(3, 4, 1.0))
    assert (cm.calls_single == 1).all() and (cm.calls_3c == 1).all() and cm.ratio == 1


def test_dense_case():
    cm = call_counts(np.full((5, 5), 64), CostConfig(3, 4, 0.5))
    assert (cm.calls_single == 128).all() and (cm.calls_3c == 3).all()
    assert cm.ratio == pytest.approx(128 / 3)


@pytest.mark.parametrize("rho, k", [(1.0, 1), (0.5, 2), (1 / 3, 3), (0.3, 4), (0.1, 10), (0.7, 2)])
def test_revisits(rho, k):
    assert revisits(rho) == k


def test_zero_density_costs_one_3c_call():
    cm = call_counts(np.zeros((2, 2), int), CostConfig(1, 4, 1.0))
    assert cm.total_single == 0 and cm.total_3c == 4


def test_ratio_curve_properties(default_stack):
    _, gt, _ = default_stack
    d = object_density_map(gt, 33)
    rhos = [1.0, 0.75, 0.5, 0.25, 0.1]
    curve = ratio_curve(d, 4, rhos)
    ratios = [r for _, r in reversed(curve)]
    assert ratios == sorted(ratios, reverse=True)
    c3 = call_counts(d, CostConfig(33, 4, 1.0))
    assert curve[0][1] == pytest.approx(d.sum() / c3.total_3c)
    n_labels = int(np.asarray(gt.data).max())
    assert c3.total_3c <= d.size * max(1, min_digits(n_labels, 4))


def test_cost_rows_report_max():
    rows = cost_rows(np.array([[1, 23]]), 4, [1.0, 0.5])
    assert rows[0] == (1.0, 24, 4, 6.0, 23) and rows[1][4] == 46


def test_transfer_pair_count():
    assert transfer_pairs(1, 2) == 0
    assert transfer_pairs(5, 2) == 14
    assert transfer_pairs(32, 2) == 4 * 32 - 6
    assert pipeline_calls(32, 2, 6) == 732
