"""Shared oracles and fixtures for the test suite.

The EER/AUC helpers here are deliberately slow, loop-based
re-derivations (exact rational arithmetic where possible) so the fast
vectorized implementations can be checked against them.
"""

from fractions import Fraction

import numpy as np

from mosfuse.data import Dataset, ScoreRecord

CRITERION_LINES: list[str] = []


def record_criterion(line: str) -> None:
    CRITERION_LINES.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if CRITERION_LINES:
        terminalreporter.section("acceptance summary")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)


# exact metric oracles -------------------------------------------------


def eer_brute(scores, labels):
    """Fraction-exact EER by direct threshold enumeration.

    Sweeps every observed score as an accept-if-score>=t threshold,
    evaluates FAR and FRR as exact rationals, and interpolates at the
    sign change of FAR - FRR. A virtual endpoint above the largest
    score (FAR = 0, FRR = 1) closes the sweep.
    """
    scores = [float(s) for s in scores]
    labels = [int(y) for y in labels]
    bona = [s for s, y in zip(scores, labels) if y == 1]
    spoof = [s for s, y in zip(scores, labels) if y == 0]
    n_b, n_s = len(bona), len(spoof)
    assert n_b > 0 and n_s > 0
    points = []
    for t in sorted(set(scores)):
        far = Fraction(sum(1 for s in spoof if s >= t), n_s)
        frr = Fraction(sum(1 for s in bona if s < t), n_b)
        points.append((t, far, frr))
    points.append((points[-1][0], Fraction(0), Fraction(1)))

    prev = None
    for t, far, frr in points:
        d = far - frr
        if d == 0:
            return float(far), float(t)
        if d < 0:
            t1, far1, d1 = prev
            u = d1 / (d1 - d)
            eer = far1 + u * (far - far1)
            return float(eer), t1 + float(u) * (t - t1)
        prev = (t, far, d)
    raise AssertionError("FAR - FRR never crossed zero")


def auc_pairs(scores, labels):
    """O(n^2) pair-counting AUC with half credit for ties."""
    bona = [float(s) for s, y in zip(scores, labels) if int(y) == 1]
    spoof = [float(s) for s, y in zip(scores, labels) if int(y) == 0]
    twice = 0
    for b in bona:
        for s in spoof:
            if b > s:
                twice += 2
            elif b == s:
                twice += 1
    return twice / (2 * len(bona) * len(spoof))


def best_split_brute(binned, g, h, idx, n_bins, cfg):
    """Exhaustive scan over every (feature, bin threshold) pair.

    Mirrors the documented tie rule (first strictly better wins, so
    the lowest feature index and lowest threshold survive ties).
    """
    from mosfuse.gbdt import Split

    lam = cfg.lambda_l2
    g_node = float(g[idx].sum())
    h_node = float(h[idx].sum())
    parent = g_node * g_node / (h_node + lam)
    best = None
    for f in range(binned.shape[1]):
        for t in range(n_bins[f] - 1):
            left = idx[binned[idx, f] <= t]
            right = idx[binned[idx, f] > t]
            if len(left) < cfg.min_data_in_leaf or len(right) < cfg.min_data_in_leaf:
                continue
            g_l, h_l = float(g[left].sum()), float(h[left].sum())
            g_r, h_r = float(g[right].sum()), float(h[right].sum())
            gain = g_l * g_l / (h_l + lam) + g_r * g_r / (h_r + lam) - parent
            if gain > 0.0 and (best is None or gain > best.gain):
                best = Split(
                    feature=f, threshold=t, gain=gain, n_left=len(left), n_right=len(right)
                )
    return best


def random_split_node(rng):
    """Random histogram node for the split-oracle comparison.

    Dyadic g/h values keep every partial sum exact in float64, so the
    scan and the vectorized path must agree bit for bit.
    """
    from mosfuse.gbdt import GbdtConfig

    n = int(rng.integers(20, 150))
    d = int(rng.integers(1, 5))
    n_bins = [int(rng.integers(2, 12)) for _ in range(d)]
    binned = np.stack([rng.integers(0, nb, size=n) for nb in n_bins], axis=1).astype(np.int32)
    g = rng.integers(-8, 9, size=n) / 4.0
    h = rng.integers(1, 9, size=n) / 4.0
    idx = np.sort(rng.choice(n, size=int(rng.integers(10, n + 1)), replace=False))
    cfg = GbdtConfig(
        min_data_in_leaf=int(rng.integers(1, 6)),
        lambda_l2=float(rng.choice([0.0, 0.5, 1.0])),
    )
    return binned, g, h, idx, n_bins, cfg


# tiny corpus builder ---------------------------------------------------


def toy_records(rng, n, split="train", fad_dim=3, mos_dim=2, prefix="u", start=0):
    """Random valid records; labels alternate so both classes appear."""
    recs = []
    for i in range(start, start + n):
        recs.append(
            ScoreRecord(
                utt_id=f"{prefix}{i:04d}",
                label="bonafide" if i % 2 == 0 else "spoof",
                split=split,
                fad=tuple(rng.uniform(0, 1, size=fad_dim)),
                mos=tuple(rng.uniform(0, 5, size=mos_dim)),
                mos_fused=float(rng.uniform(0, 5)),
            )
        )
    return recs


def toy_dataset(rng, n, **kw):
    return Dataset(toy_records(rng, n, **kw))


def separable_arrays(rng, n, dim=4, margin=2.0):
    """Linearly separable (x, y) pair: class 1 sits ``margin`` higher."""
    y = (np.arange(n) % 2 == 0).astype(np.float64)
    x = rng.normal(0.0, 1.0, size=(n, dim))
    x[y == 1] += margin
    return x, y
