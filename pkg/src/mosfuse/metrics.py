"""Detection metrics: EER, AUC, paired-bootstrap significance.

Conventions. Scores are real-valued with higher = more likely
bonafide; labels are 1 for bonafide and 0 for spoof. A threshold t
accepts score >= t as bonafide, so

    FAR(t) = fraction of spoof scores >= t   (false acceptances)
    FRR(t) = fraction of bonafide scores < t (false rejections)

As t sweeps upward FAR falls from 1 to 0 while FRR rises from 0 to 1,
so FAR - FRR changes sign exactly once. The EER is taken at that
crossing, linearly interpolated between the two adjacent operating
points. All crossing arithmetic runs on exact integer counts (via
fractions), so the result is the correctly rounded float of the exact
rational EER and is invariant under any strictly increasing transform
of the scores.

AUC is the Mann-Whitney statistic (ties count 1/2), also computed from
exact integer pair counts.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np


def _split_scores(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.ndim != 1 or labels.shape != scores.shape:
        raise ValueError("scores and labels must be 1-d arrays of equal length")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores contain non-finite values")
    if not np.all((labels == 0) | (labels == 1)):
        raise ValueError("labels must be 0 (spoof) or 1 (bonafide)")
    bona = np.sort(scores[labels == 1])
    spoof = np.sort(scores[labels == 0])
    if len(bona) == 0 or len(spoof) == 0:
        raise ValueError("both classes must be present to compute a detection metric")
    return bona, spoof


def compute_eer(scores, labels) -> tuple[float, float]:
    """Equal error rate and its operating threshold.

    Returns ``(eer, threshold)`` with eer in [0, 1]. When no swept
    threshold gives FAR == FRR exactly, both are linearly interpolated
    between the two operating points where FAR - FRR changes sign.
    """
    bona, spoof = _split_scores(scores, labels)
    n_b, n_s = len(bona), len(spoof)
    ts = np.unique(np.concatenate([bona, spoof]))

    # integer error counts at each candidate threshold
    spoof_ge = n_s - np.searchsorted(spoof, ts, side="left")  # spoof scores >= t
    bona_lt = np.searchsorted(bona, ts, side="left")          # bonafide scores < t
    # d = FAR - FRR scaled by n_s * n_b; non-increasing along ts
    d = spoof_ge * n_b - bona_lt * n_s

    # virtual endpoint above the max score: FAR = 0, FRR = 1
    j = int(np.argmax(d <= 0)) if np.any(d <= 0) else len(ts)
    if j < len(ts) and d[j] == 0:
        eer = Fraction(int(spoof_ge[j]), n_s)
        return float(eer), float(ts[j])

    # interpolate within [j-1, j]; d[j-1] > 0 > d[j] (d[0] is always > 0)
    d1 = int(d[j - 1])
    if j < len(ts):
        d2 = int(d[j])
        far1 = Fraction(int(spoof_ge[j - 1]), n_s)
        far2 = Fraction(int(spoof_ge[j]), n_s)
        t1, t2 = float(ts[j - 1]), float(ts[j])
    else:
        d2 = -n_s * n_b
        far1 = Fraction(int(spoof_ge[j - 1]), n_s)
        far2 = Fraction(0)
        t1 = t2 = float(ts[j - 1])
    u = Fraction(d1, d1 - d2)
    eer = far1 + u * (far2 - far1)
    thr = t1 + float(u) * (t2 - t1)
    return float(eer), thr


def compute_auc(scores, labels) -> float:
    """Probability a random bonafide outscores a random spoof (ties = 1/2)."""
    bona, spoof = _split_scores(scores, labels)
    n_b, n_s = len(bona), len(spoof)
    wins = int(np.searchsorted(spoof, bona, side="left").sum())
    wins_or_ties = int(np.searchsorted(spoof, bona, side="right").sum())
    twice_u = 2 * wins + (wins_or_ties - wins)
    return twice_u / (2 * n_b * n_s)


def det_points(scores, labels) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Swept operating points ``(thresholds, far, frr)`` for DET export."""
    bona, spoof = _split_scores(scores, labels)
    n_b, n_s = len(bona), len(spoof)
    ts = np.unique(np.concatenate([bona, spoof]))
    far = (n_s - np.searchsorted(spoof, ts, side="left")) / n_s
    frr = np.searchsorted(bona, ts, side="left") / n_b
    return ts, far, frr


def relative_reduction(eer_new: float, eer_ref: float) -> float:
    """Relative EER improvement of ``eer_new`` over ``eer_ref``."""
    if not eer_ref > 0:
        raise ValueError(f"reference EER must be positive, got {eer_ref!r}")
    return (eer_ref - eer_new) / eer_ref


@dataclass(frozen=True)
class EvalReport:
    """Summary metrics for one system on one labeled dataset."""

    eer: float
    eer_threshold: float
    auc: float
    n_bonafide: int
    n_spoof: int

    def to_dict(self) -> dict:
        return {
            "eer": self.eer,
            "eer_threshold": self.eer_threshold,
            "auc": self.auc,
            "n_bonafide": self.n_bonafide,
            "n_spoof": self.n_spoof,
        }


def evaluate_scores(scores, labels) -> EvalReport:
    eer, thr = compute_eer(scores, labels)
    auc = compute_auc(scores, labels)
    labels = np.asarray(labels)
    return EvalReport(
        eer=eer,
        eer_threshold=thr,
        auc=auc,
        n_bonafide=int((labels == 1).sum()),
        n_spoof=int((labels == 0).sum()),
    )


@dataclass(frozen=True)
class SignificanceResult:
    """Paired-bootstrap comparison of two systems on shared trials.

    ``p_value`` is the one-sided probability that system A is not
    better (not lower-EER) than system B: the fraction of bootstrap
    replicates where EER_b - EER_a <= 0.
    """

    p_value: float
    n_bootstrap: int
    eer_a: float
    eer_b: float
    significant_at: float
    n_redraws: int = 0

    @property
    def significant(self) -> bool:
        return self.p_value < self.significant_at

    def to_dict(self) -> dict:
        return {
            "p_value": self.p_value,
            "n_bootstrap": self.n_bootstrap,
            "eer_a": self.eer_a,
            "eer_b": self.eer_b,
            "significant_at": self.significant_at,
            "significant": self.significant,
            "n_redraws": self.n_redraws,
        }


def bootstrap_significance(
    scores_a,
    scores_b,
    labels,
    n_bootstrap: int = 1000,
    seed: int = 0,
    significant_at: float = 0.01,
) -> SignificanceResult:
    """Paired bootstrap test that system A has lower EER than system B.

    Both score vectors must align element-wise with ``labels``. Each
    replicate resamples trial indices with replacement (from its own
    seeded substream, so results do not depend on evaluation order) and
    records EER_b - EER_a. Resamples that lose one of the classes are
    redrawn; after 10 * n_bootstrap redraws in total the test aborts.
    """
    scores_a = np.asarray(scores_a, dtype=np.float64)
    scores_b = np.asarray(scores_b, dtype=np.float64)
    labels = np.asarray(labels)
    if not (scores_a.shape == scores_b.shape == labels.shape) or scores_a.ndim != 1:
        raise ValueError("scores_a, scores_b, labels must be 1-d arrays of equal length")
    if n_bootstrap < 1:
        raise ValueError("n_bootstrap must be >= 1")
    eer_a = compute_eer(scores_a, labels)[0]
    eer_b = compute_eer(scores_b, labels)[0]

    n = len(labels)
    max_redraws = 10 * n_bootstrap
    redraws = 0
    not_better = 0
    streams = np.random.SeedSequence(seed).spawn(n_bootstrap)
    for ss in streams:
        rng = np.random.default_rng(ss)
        while True:
            idx = rng.integers(0, n, size=n)
            lab = labels[idx]
            if lab.min() != lab.max():
                break
            redraws += 1
            if redraws > max_redraws:
                raise RuntimeError(
                    f"bootstrap aborted: {redraws} single-class resamples "
                    f"(limit {max_redraws})"
                )
        delta = compute_eer(scores_b[idx], lab)[0] - compute_eer(scores_a[idx], lab)[0]
        if delta <= 0:
            not_better += 1
    return SignificanceResult(
        p_value=not_better / n_bootstrap,
        n_bootstrap=n_bootstrap,
        eer_a=eer_a,
        eer_b=eer_b,
        significant_at=significant_at,
        n_redraws=redraws,
    )
