import json

import numpy as np
import pytest
from scipy import ndimage

from crossclass.errors import ConfigError, ConfigInfeasible
from crossclass.synth import BAND_FLOOR, GenConfig, boundary_band, generate_stack, perturb_elevation
from crossclass.volume import ScalarStack


def test_single_object_present_in_every_section():
    gt, _ = generate_stack(GenConfig(z=16, y=64, x=64, n_objects=1, gap_prob=0.0, rng_seed=5))
    assert all(set(np.unique(gt.data[z])) == {0, 1} for z in range(16))


def test_deterministic(small_stack):
    cfg, gt, elev = small_stack
    gt2, elev2 = generate_stack(cfg)
    assert gt == gt2 and elev == elev2


def test_different_seeds_differ():
    a, _ = generate_stack(GenConfig(z=4, y=40, x=40, n_objects=4, mean_radius=3, rng_seed=1))
    b, _ = generate_stack(GenConfig(z=4, y=40, x=40, n_objects=4, mean_radius=3, rng_seed=2))
    assert a != b


def test_hard_indicator_without_blur_or_noise():
    _, elev = generate_stack(GenConfig(z=4, y=48, x=48, n_objects=5, elevation_blur_radius=0, noise_sigma=0))
    assert set(np.unique(elev.data).tolist()) <= {0.0, 1.0}


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_default_cube_postconditions(seed):
    cfg = GenConfig(rng_seed=seed, branch_prob=0.05)
    gt, elev = generate_stack(cfg)
    g = np.asarray(gt.data)
    labels = np.unique(g[g > 0])
    assert 1 <= len(labels) <= cfg.n_objects
    assert labels.tolist() == list(range(1, len(labels) + 1))
    comps, n = ndimage.label(g > 0, structure=np.ones((3, 3, 3)))
    for c in range(1, n + 1):
        assert len(np.unique(g[comps == c])) == 1
    e = np.asarray(elev.data)
    for z in range(cfg.z):
        assert (e[z][boundary_band(g[z])] >= BAND_FLOOR).all()
        for lab in np.unique(g[z][g[z] > 0]):
            assert e[z][g[z] == lab].min() < 0.5


def test_no_gaps_means_objects_span_contiguous_sections(small_stack):
    _, gt, _ = small_stack
    g = np.asarray(gt.data)
    for lab in range(1, g.max() + 1):
        zs = np.flatnonzero((g == lab).any(axis=(1, 2)))
        assert zs.tolist() == list(range(zs[0], zs[-1] + 1))


def test_gaps_remove_objects_from_sections():
    gt, _ = generate_stack(GenConfig(z=20, y=64, x=64, n_objects=6, gap_prob=0.3, rng_seed=4))
    per_section = [len(np.unique(gt.data[z])) - 1 for z in range(20)]
    assert min(per_section) < 6


def test_infeasible_packing():
    with pytest.raises(ConfigInfeasible):
        generate_stack(GenConfig(z=2, y=20, x=20, n_objects=50, mean_radius=5))


@pytest.mark.parametrize(
    "bad", [{"n_objects": 0}, {"mean_radius": 0.5}, {"gap_prob": 1.5}, {"noise_sigma": -1}, {"colour": 1}]
)
def test_invalid_config(bad):
    with pytest.raises(ConfigError):
        GenConfig.from_dict(bad)


def test_config_json_roundtrip(tmp_path):
    cfg = GenConfig(z=3, n_objects=2, rng_seed=11)
    p = tmp_path / "g.json"
    p.write_text(json.dumps(cfg.to_dict()))
    assert GenConfig.load(p) == cfg


def test_perturb_zero_sigma_is_identity(small_stack):
    _, _, elev = small_stack
    assert perturb_elevation(elev, 0.0, 1) == elev


def test_perturb_large_sigma_stays_in_range(small_stack):
    out = perturb_elevation(small_stack[2], 10.0, 1)
    assert out.data.min() >= 0 and out.data.max() <= 1


def test_perturb_stddev():
    out = perturb_elevation(ScalarStack(np.full((4, 200, 200), 0.5)), 0.1, 7)
    assert 0.07 <= float(np.std(out.data)) <= 0.13


def test_perturb_deterministic(small_stack):
    elev = small_stack[2]
    assert perturb_elevation(elev, 0.2, 3) == perturb_elevation(elev, 0.2, 3)
