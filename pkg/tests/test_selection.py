import numpy as np

from logan.data import LoganConfig
from logan.selection import grid_search
from logan.synthetic import PlantedBiasSpec, generate

from helpers import make_dataset, random_dataset

import pytest


def small_cfg(seed=0):
    return LoganConfig(k=4, min_clusters=2, min_cluster_total=5, min_per_group=3, seed=seed)


def test_single_element_grid():
    rng = np.random.default_rng(1)
    d = random_dataset(rng, 60)
    result = grid_search(d, small_cfg(), [7.5])
    assert result.chosen_lambda == 7.5
    assert len(result.cells) == 1
    assert result.chosen.lam == 7.5


def test_zero_grid_on_unbiased_data():
    feats = [[float(i % 5), 0.0] for i in range(80)]
    d = make_dataset(feats, ["a", "b"] * 40, [1, 0] * 40, [1, 0] * 40)
    result = grid_search(d, small_cfg(), [0.0])
    assert result.chosen_lambda == 0.0
    assert result.chosen.biased_count == 0


def test_grid_order_does_not_change_choice():
    d = generate(PlantedBiasSpec(n_per_component=80, seed=3))
    cfg = LoganConfig(k=8, min_clusters=5, seed=11)
    grid = [1.0, 5.0, 10.0, 100.0]
    forward = grid_search(d, cfg, grid)
    backward = grid_search(d, cfg, grid[::-1])
    assert forward.chosen_lambda == backward.chosen_lambda


def test_cells_reproducible():
    rng = np.random.default_rng(5)
    d = random_dataset(rng, 120)
    cfg = small_cfg(seed=9)
    a = grid_search(d, cfg, [1.0, 10.0])
    b = grid_search(d, cfg, [1.0, 10.0])
    assert a.chosen_lambda == b.chosen_lambda
    for cell_a, cell_b in zip(a.cells, b.cells):
        assert np.array_equal(cell_a.model.assignment, cell_b.model.assignment)
        assert cell_a.biased_count == cell_b.biased_count
        assert cell_a.max_gap == cell_b.max_gap


def test_empty_or_negative_grid_rejected():
    rng = np.random.default_rng(2)
    d = random_dataset(rng, 30)
    with pytest.raises(ValueError):
        grid_search(d, small_cfg(), [])
    with pytest.raises(ValueError):
        grid_search(d, small_cfg(), [1.0, -2.0])
