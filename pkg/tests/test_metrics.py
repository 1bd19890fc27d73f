"""EER/AUC against exact slow oracles, DET sweep, bootstrap test."""

import numpy as np
import pytest
from conftest import auc_pairs, eer_brute

from mosfuse.metrics import (
    bootstrap_significance,
    compute_auc,
    compute_eer,
    det_points,
    evaluate_scores,
    relative_reduction,
)


def _random_instance(rng, n_min=2, n_max=20, quantize=False):
    """Scores for >= 1 record of each class; ties forced when quantized."""
    n_b = int(rng.integers(1, n_max // 2 + 1))
    n_s = int(rng.integers(1, n_max // 2 + 1))
    scores = rng.normal(0.0, 1.0, size=n_b + n_s)
    if quantize:
        scores = np.round(scores * 2) / 2
    labels = np.concatenate([np.ones(n_b, dtype=int), np.zeros(n_s, dtype=int)])
    perm = rng.permutation(n_b + n_s)
    return scores[perm], labels[perm]


def test_eer_matches_rational_oracle_exactly():
    rng = np.random.default_rng(42)
    for k in range(80):
        scores, labels = _random_instance(rng, quantize=(k % 2 == 0))
        eer, thr = compute_eer(scores, labels)
        b_eer, b_thr = eer_brute(scores, labels)
        assert eer == b_eer
        assert thr == b_thr
        assert 0.0 <= eer <= 1.0


def test_eer_trivial_geometries():
    # separated, anti-separated, and all-tied score sets
    assert compute_eer([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0])[0] == 0.0
    assert compute_eer([0.1, 0.2, 0.9, 0.8], [1, 1, 0, 0])[0] == 1.0
    assert compute_eer([0.5, 0.5, 0.5, 0.5], [1, 1, 0, 0])[0] == 0.5


def test_eer_is_order_invariant():
    rng = np.random.default_rng(5)
    scores, labels = _random_instance(rng, n_max=16)
    ref = compute_eer(scores, labels)
    for _ in range(10):
        perm = rng.permutation(len(scores))
        assert compute_eer(scores[perm], labels[perm]) == ref


def test_eer_agrees_with_dense_threshold_sweep():
    rng = np.random.default_rng(17)
    n = 2000
    labels = (rng.random(n) < 0.4).astype(int)
    labels[:2] = [0, 1]
    scores = rng.normal(labels.astype(float), 0.8)
    eer = compute_eer(scores, labels)[0]
    ts = np.linspace(scores.min() - 1e-6, scores.max() + 1e-6, 100_000)
    bona, spoof = scores[labels == 1], scores[labels == 0]
    far = (spoof[None, :] >= ts[:, None]).mean(axis=1)
    frr = (bona[None, :] < ts[:, None]).mean(axis=1)
    dense = 0.5 * (far + frr)[np.argmin(np.abs(far - frr))]
    assert abs(eer - dense) <= 5e-3


def test_auc_matches_pair_counting_exactly():
    rng = np.random.default_rng(6)
    for k in range(60):
        scores, labels = _random_instance(rng, quantize=(k % 3 == 0))
        assert compute_auc(scores, labels) == auc_pairs(scores, labels)


def test_auc_extremes():
    assert compute_auc([0.9, 0.8, 0.1], [1, 1, 0]) == 1.0
    assert compute_auc([0.1, 0.2, 0.9], [1, 1, 0]) == 0.0
    assert compute_auc([0.5, 0.5], [1, 0]) == 0.5


def test_det_points_are_monotone():
    rng = np.random.default_rng(12)
    scores, labels = _random_instance(rng, n_max=18)
    ts, far, frr = det_points(scores, labels)
    assert np.all(np.diff(ts) > 0)
    assert np.all(np.diff(far) <= 0)
    assert np.all(np.diff(frr) >= 0)
    assert far[0] == 1.0 and frr[0] == 0.0


def test_relative_reduction_arithmetic():
    assert relative_reduction(0.1, 0.2) == 0.5
    assert relative_reduction(0.2, 0.2) == 0.0
    assert relative_reduction(0.3, 0.2) == pytest.approx(-0.5)
    with pytest.raises(ValueError):
        relative_reduction(0.1, 0.0)


def test_evaluate_scores_bundles_the_row_metrics():
    rng = np.random.default_rng(13)
    scores, labels = _random_instance(rng, n_max=20)
    rep = evaluate_scores(scores, labels)
    assert (rep.eer, rep.eer_threshold) == compute_eer(scores, labels)
    assert rep.auc == compute_auc(scores, labels)
    assert rep.n_bonafide == int(labels.sum())
    assert rep.n_spoof == int((1 - labels).sum())
    assert set(rep.to_dict()) == {"eer", "eer_threshold", "auc", "n_bonafide", "n_spoof"}


def test_bootstrap_is_deterministic_and_sane():
    rng = np.random.default_rng(21)
    n = 400
    labels = (rng.random(n) < 0.5).astype(int)
    labels[:2] = [0, 1]
    good = rng.normal(2.0 * labels, 0.5)
    bad = rng.normal(0.0, 1.0, size=n)
    r1 = bootstrap_significance(good, bad, labels, n_bootstrap=200, seed=3)
    r2 = bootstrap_significance(good, bad, labels, n_bootstrap=200, seed=3)
    assert r1 == r2
    assert r1.p_value < 0.05
    assert r1.significant
    same = bootstrap_significance(good, good, labels, n_bootstrap=200, seed=3)
    assert same.p_value >= 0.5
    assert not same.significant


def test_bootstrap_validates_shapes():
    with pytest.raises(ValueError):
        bootstrap_significance([0.1, 0.2], [0.1], [1, 0])
    with pytest.raises(ValueError):
        bootstrap_significance([0.1, 0.2], [0.1, 0.3], [1, 0], n_bootstrap=0)
