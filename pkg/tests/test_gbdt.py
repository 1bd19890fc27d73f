"""Histogram GBDT: split oracle, structure limits, boosting behavior."""

import json

import numpy as np
import pytest
from conftest import best_split_brute, random_split_node, separable_arrays

from mosfuse.gbdt import (
    GbdtConfig,
    bin_features,
    build_bins,
    find_best_split,
    gbdt_predict,
    predict_batch_ensemble,
    train_gbdt,
)


def test_find_best_split_matches_exhaustive_scan():
    rng = np.random.default_rng(0)
    n_with_split = 0
    for _ in range(40):
        binned, g, h, idx, n_bins, cfg = random_split_node(rng)
        got = find_best_split(binned, g, h, idx, n_bins, cfg)
        want = best_split_brute(binned, g, h, idx, n_bins, cfg)
        if want is None:
            assert got is None
            continue
        n_with_split += 1
        assert (got.feature, got.threshold) == (want.feature, want.threshold)
        assert (got.n_left, got.n_right) == (want.n_left, want.n_right)
        assert got.gain == pytest.approx(want.gain, rel=1e-12)
    assert n_with_split >= 20


def test_split_respects_min_data_in_leaf():
    binned = np.array([[0], [0], [1], [1], [1]], dtype=np.int32)
    g = np.array([1.0, 1.0, -1.0, -1.0, -1.0])
    h = np.ones(5)
    idx = np.arange(5)
    assert find_best_split(binned, g, h, idx, [2], GbdtConfig(min_data_in_leaf=3)) is None
    got = find_best_split(binned, g, h, idx, [2], GbdtConfig(min_data_in_leaf=2))
    assert got is not None and got.threshold == 0


def test_build_bins_and_bin_features():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(500, 2))
    x[:, 1] = np.round(x[:, 1])  # few distinct values
    bounds = build_bins(x, max_bin=25)
    assert len(bounds) == 2
    for b in bounds:
        assert np.all(np.diff(b) > 0)
    binned = bin_features(x, bounds)
    for f in range(2):
        assert binned[:, f].max() <= len(bounds[f])
        # boundary b[i] separates bins i and i+1
        want = np.searchsorted(bounds[f], x[:, f], side="left")
        assert np.array_equal(binned[:, f], want)
    assert len(bounds[0]) <= 24


def test_trained_trees_respect_structure_limits():
    rng = np.random.default_rng(2)
    x, y = separable_arrays(rng, 600, dim=3, margin=1.0)
    xv, yv = separable_arrays(rng, 200, dim=3, margin=1.0)
    cfg = GbdtConfig(num_rounds=12, num_leaves=6, max_depth=3, min_data_in_leaf=8)
    ens, hist = train_gbdt(x, y, xv, yv, cfg)
    assert 1 <= len(ens.trees) <= cfg.num_rounds
    binned = bin_features(x, ens.bin_boundaries)
    for tree in ens.trees:
        assert 2 <= tree.num_leaves <= cfg.num_leaves
        assert tree.depth <= cfg.max_depth
        for nd in tree.nodes:
            if nd.is_leaf:
                assert nd.n_samples >= cfg.min_data_in_leaf
        # routing the training rows reproduces the stored leaf sizes
        node_of = np.zeros(len(x), dtype=int)
        for nid, nd in enumerate(tree.nodes):
            rows = np.nonzero(node_of == nid)[0]
            if nd.is_leaf:
                assert len(rows) == nd.n_samples
            else:
                goes_left = binned[rows, nd.feature] <= nd.threshold
                node_of[rows[goes_left]] = nd.left
                node_of[rows[~goes_left]] = nd.right


def test_train_loss_decreases_on_separable_data():
    rng = np.random.default_rng(3)
    x, y = separable_arrays(rng, 400, dim=2, margin=2.0)
    xv, yv = separable_arrays(rng, 150, dim=2, margin=2.0)
    cfg = GbdtConfig(num_rounds=10, early_stopping_rounds=10)
    ens, hist = train_gbdt(x, y, xv, yv, cfg)
    losses = hist.train_loss
    assert len(losses) == 10
    assert all(b < a for a, b in zip(losses, losses[1:]))
    assert hist.valid_auc[hist.best_round - 1] == max(hist.valid_auc)


def test_early_stopping_keeps_best_prefix():
    rng = np.random.default_rng(4)
    x, y = separable_arrays(rng, 300, dim=2, margin=1.5)
    xv, yv = separable_arrays(rng, 100, dim=2, margin=1.5)
    cfg = GbdtConfig(num_rounds=60, early_stopping_rounds=3)
    ens, hist = train_gbdt(x, y, xv, yv, cfg)
    assert len(ens.trees) == hist.best_round
    assert len(hist.valid_auc) <= cfg.num_rounds


def test_predict_paths_agree_and_are_deterministic():
    rng = np.random.default_rng(5)
    x, y = separable_arrays(rng, 300, dim=3, margin=1.0)
    xv, yv = separable_arrays(rng, 100, dim=3, margin=1.0)
    cfg = GbdtConfig(num_rounds=8)
    ens1, _ = train_gbdt(x, y, xv, yv, cfg)
    ens2, _ = train_gbdt(x, y, xv, yv, cfg)
    probe = rng.normal(size=(40, 3))
    p1 = predict_batch_ensemble(ens1, probe)
    p2 = predict_batch_ensemble(ens2, probe)
    assert np.array_equal(p1, p2)
    assert np.all((p1 > 0) & (p1 < 1))
    single = np.array([gbdt_predict(ens1, row) for row in probe])
    assert np.allclose(p1, single, rtol=0, atol=1e-15)


def test_config_validation_and_echo():
    with pytest.raises(ValueError):
        GbdtConfig(objective="regression")
    with pytest.raises(ValueError):
        GbdtConfig(num_leaves=1)
    with pytest.raises(ValueError):
        GbdtConfig(learning_rate=0.0)
    cfg = GbdtConfig()
    echo = cfg.to_dict()
    assert echo["objective"] == "binary"
    assert echo["metric"] == "auc"
    assert echo["num_leaves"] == 16
    assert echo["max_bin"] == 25
    assert echo["max_depth"] == 4
    assert echo["learning_rate"] == 0.1
    assert echo["min_data_in_leaf"] == 5
    assert GbdtConfig(**echo) == cfg


def test_single_class_labels_rejected():
    x = np.zeros((20, 2))
    with pytest.raises(ValueError):
        train_gbdt(x, np.ones(20), x, np.ones(20))
