"""Leaf-wise histogram gradient-boosted trees for binary detection.

Implements the familiar second-order boosting recipe on quantile-binned
features: per-round gradients g = p - y and hessians h = p(1 - p) of
the logistic loss, histogram split search over bin boundaries, and
leaf-wise growth (always split the frontier leaf with the largest
gain). Split gain for a candidate partition (L, R) is

    G_L^2 / (H_L + lam) + G_R^2 / (H_R + lam) - (G_L+G_R)^2 / (H_L+H_R + lam)

and a trained leaf's value is -sum(g) / (sum(h) + lam) scaled by the
learning rate. The ensemble starts from the log-odds of the training
prior and stops early on validation AUC.

Determinism: bin construction is sort-based, histograms accumulate in
index order, and split ties break toward the lowest feature index and
then the lowest threshold, so training is a pure function of its
inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit as sigmoid

from .metrics import compute_auc


@dataclass(frozen=True)
class GbdtConfig:
    objective: str = "binary"
    metric: str = "auc"
    num_leaves: int = 16
    max_bin: int = 25
    max_depth: int = 4
    learning_rate: float = 0.1
    min_data_in_leaf: int = 5
    lambda_l2: float = 0.0
    num_rounds: int = 100
    early_stopping_rounds: int = 20

    def __post_init__(self):
        if self.objective != "binary":
            raise ValueError(f"unsupported objective {self.objective!r}")
        if self.metric != "auc":
            raise ValueError(f"unsupported metric {self.metric!r}")
        if self.num_leaves < 2:
            raise ValueError("num_leaves must be >= 2")
        if self.max_bin < 2:
            raise ValueError("max_bin must be >= 2")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must be in (0, 1]")
        if self.min_data_in_leaf < 1:
            raise ValueError("min_data_in_leaf must be >= 1")
        if self.lambda_l2 < 0.0:
            raise ValueError("lambda_l2 must be >= 0")
        if self.num_rounds < 1:
            raise ValueError("num_rounds must be >= 1")
        if self.early_stopping_rounds < 1:
            raise ValueError("early_stopping_rounds must be >= 1")

    def to_dict(self) -> dict:
        return {
            "objective": self.objective,
            "metric": self.metric,
            "num_leaves": self.num_leaves,
            "max_bin": self.max_bin,
            "max_depth": self.max_depth,
            "learning_rate": self.learning_rate,
            "min_data_in_leaf": self.min_data_in_leaf,
            "lambda_l2": self.lambda_l2,
            "num_rounds": self.num_rounds,
            "early_stopping_rounds": self.early_stopping_rounds,
        }


def build_bins(x: np.ndarray, max_bin: int) -> list[np.ndarray]:
    """Per-feature equal-count bin boundaries (strictly increasing).

    Features with up to ``max_bin`` distinct values get one bin per
    value (boundaries at midpoints); denser features are cut at the
    k/max_bin quantile positions. Constant features yield no
    boundaries. Invariant under row permutation by construction.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("build_bins expects a non-empty (n, d) matrix")
    if not np.all(np.isfinite(x)):
        raise ValueError("features contain non-finite values")
    if max_bin < 2:
        raise ValueError("max_bin must be >= 2")
    n = x.shape[0]
    boundaries = []
    for f in range(x.shape[1]):
        s = np.sort(x[:, f])
        distinct = np.unique(s)
        if len(distinct) <= max_bin:
            cuts = (distinct[:-1] + distinct[1:]) / 2.0
        else:
            cut_list = []
            for k in range(1, max_bin):
                i = (k * n) // max_bin
                if 0 < i < n and s[i - 1] < s[i]:
                    cut_list.append((s[i - 1] + s[i]) / 2.0)
            cuts = np.unique(np.asarray(cut_list, dtype=np.float64))
        boundaries.append(cuts)
    return boundaries


def bin_features(x: np.ndarray, boundaries: list[np.ndarray]) -> np.ndarray:
    """Map raw features to integer bin indices (same mapper as training)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != len(boundaries):
        raise ValueError(f"expected (n, {len(boundaries)}) inputs, got {x.shape}")
    out = np.empty(x.shape, dtype=np.int64)
    for f, cuts in enumerate(boundaries):
        out[:, f] = np.searchsorted(cuts, x[:, f], side="left")
    return out


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: int  # bin index; bin <= threshold goes left
    gain: float
    n_left: int
    n_right: int


def find_best_split(
    binned: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    idx: np.ndarray,
    n_bins: list[int],
    cfg: GbdtConfig,
) -> Split | None:
    """Best positive-gain histogram split of the sample set ``idx``.

    Ties break toward the lowest feature index, then the lowest
    threshold. Returns None when no split has gain > 0 or no split
    satisfies ``min_data_in_leaf`` on both sides.
    """
    lam = cfg.lambda_l2
    g_node = float(g[idx].sum())
    h_node = float(h[idx].sum())
    n_node = len(idx)
    parent = (g_node * g_node) / (h_node + lam) if n_node else 0.0
    best: Split | None = None
    for f in range(binned.shape[1]):
        nb = n_bins[f]
        if nb < 2:
            continue
        b = binned[idx, f]
        cnt = np.bincount(b, minlength=nb)
        gs = np.bincount(b, weights=g[idx], minlength=nb)
        hs = np.bincount(b, weights=h[idx], minlength=nb)
        cnt_l = np.cumsum(cnt)[:-1]
        g_l = np.cumsum(gs)[:-1]
        h_l = np.cumsum(hs)[:-1]
        cnt_r = n_node - cnt_l
        g_r = g_node - g_l
        h_r = h_node - h_l
        ok = (cnt_l >= cfg.min_data_in_leaf) & (cnt_r >= cfg.min_data_in_leaf)
        if not np.any(ok):
            continue
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = g_l * g_l / (h_l + lam) + g_r * g_r / (h_r + lam) - parent
        gain = np.where(ok, gain, -np.inf)
        t = int(np.argmax(gain))  # first max = lowest threshold
        if gain[t] > 0.0 and (best is None or gain[t] > best.gain):
            best = Split(
                feature=f,
                threshold=t,
                gain=float(gain[t]),
                n_left=int(cnt_l[t]),
                n_right=int(cnt_r[t]),
            )
    return best


@dataclass
class TreeNode:
    feature: int = -1     # -1 marks a leaf
    threshold: int = -1
    left: int = -1
    right: int = -1
    value: float = 0.0    # leaf value, learning rate already applied
    gain: float = 0.0
    depth: int = 0
    n_samples: int = 0

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0


@dataclass
class Tree:
    nodes: list[TreeNode] = field(default_factory=list)
    split_order: list[int] = field(default_factory=list)  # node ids in growth order

    @property
    def num_leaves(self) -> int:
        return sum(1 for nd in self.nodes if nd.is_leaf)

    @property
    def depth(self) -> int:
        return max((nd.depth for nd in self.nodes), default=0)

    def predict_binned(self, binned: np.ndarray) -> np.ndarray:
        # children always carry larger ids than their parent, so one
        # forward pass over the node list routes every row to its leaf
        node_of = np.zeros(binned.shape[0], dtype=np.int64)
        out = np.empty(binned.shape[0])
        for nid, nd in enumerate(self.nodes):
            rows = np.nonzero(node_of == nid)[0]
            if rows.size == 0:
                continue
            if nd.is_leaf:
                out[rows] = nd.value
            else:
                goes_left = binned[rows, nd.feature] <= nd.threshold
                node_of[rows[goes_left]] = nd.left
                node_of[rows[~goes_left]] = nd.right
        return out


def _grow_tree(
    binned: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    n_bins: list[int],
    cfg: GbdtConfig,
) -> Tree:
    lam = cfg.lambda_l2
    tree = Tree()

    def leaf_value(idx: np.ndarray) -> float:
        return -float(g[idx].sum()) / (float(h[idx].sum()) + lam) * cfg.learning_rate

    root_idx = np.arange(binned.shape[0])
    tree.nodes.append(
        TreeNode(value=leaf_value(root_idx), depth=0, n_samples=len(root_idx))
    )
    # frontier: node id -> (sample idx, best split); depth-capped leaves excluded
    frontier: dict[int, tuple[np.ndarray, Split | None]] = {
        0: (root_idx, find_best_split(binned, g, h, root_idx, n_bins, cfg))
    }
    n_leaves = 1
    while n_leaves < cfg.num_leaves:
        best_id, best_split = -1, None
        for nid in sorted(frontier):  # ties break toward the oldest leaf
            sp = frontier[nid][1]
            if sp is not None and (best_split is None or sp.gain > best_split.gain):
                best_id, best_split = nid, sp
        if best_split is None:
            break
        idx, _ = frontier.pop(best_id)
        node = tree.nodes[best_id]
        b = binned[idx, best_split.feature]
        left_idx = idx[b <= best_split.threshold]
        right_idx = idx[b > best_split.threshold]
        child_depth = node.depth + 1
        left_id = len(tree.nodes)
        tree.nodes.append(
            TreeNode(value=leaf_value(left_idx), depth=child_depth, n_samples=len(left_idx))
        )
        right_id = len(tree.nodes)
        tree.nodes.append(
            TreeNode(value=leaf_value(right_idx), depth=child_depth, n_samples=len(right_idx))
        )
        node.feature = best_split.feature
        node.threshold = best_split.threshold
        node.left = left_id
        node.right = right_id
        node.gain = best_split.gain
        tree.split_order.append(best_id)
        n_leaves += 1
        if child_depth < cfg.max_depth:
            frontier[left_id] = (left_idx, find_best_split(binned, g, h, left_idx, n_bins, cfg))
            frontier[right_id] = (right_idx, find_best_split(binned, g, h, right_idx, n_bins, cfg))
    return tree


@dataclass
class TreeEnsemble:
    config: GbdtConfig
    base_score: float  # log-odds of the training prior
    bin_boundaries: list[np.ndarray]
    trees: list[Tree] = field(default_factory=list)
    features: str = "fad+mos_fused"

    def raw_scores(self, x: np.ndarray) -> np.ndarray:
        binned = bin_features(x, self.bin_boundaries)
        out = np.full(x.shape[0], self.base_score)
        for tree in self.trees:
            out += tree.predict_binned(binned)
        return out


def gbdt_predict(ens: TreeEnsemble, x) -> float:
    """Probability-scale score for one raw feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (len(ens.bin_boundaries),):
        raise ValueError(f"expected input of shape ({len(ens.bin_boundaries)},), got {x.shape}")
    return float(sigmoid(ens.raw_scores(x[None, :]))[0])


def predict_batch_ensemble(ens: TreeEnsemble, x: np.ndarray) -> np.ndarray:
    return sigmoid(ens.raw_scores(np.asarray(x, dtype=np.float64)))


@dataclass(frozen=True)
class GbdtHistory:
    train_loss: tuple[float, ...]  # logistic loss per round
    valid_auc: tuple[float, ...]
    best_round: int  # 1-based; 0 when no tree was kept


def _logloss(p: np.ndarray, y: np.ndarray) -> float:
    p = np.clip(p, 1e-12, 1.0 - 1e-12)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p)))


def train_gbdt(
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_valid: np.ndarray,
    y_valid: np.ndarray,
    cfg: GbdtConfig = GbdtConfig(),
    features: str = "fad+mos_fused",
) -> tuple[TreeEnsemble, GbdtHistory]:
    """Boost on (x_train, y_train), early-stop on validation AUC.

    Returns the prefix of trees with the best validation AUC. Training
    stops when AUC has not strictly improved for
    ``early_stopping_rounds`` rounds, when ``num_rounds`` is reached,
    or when a round produces no positive-gain split.
    """
    x_train = np.asarray(x_train, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.float64)
    x_valid = np.asarray(x_valid, dtype=np.float64)
    y_valid = np.asarray(y_valid, dtype=np.float64)
    if x_train.ndim != 2 or len(x_train) != len(y_train):
        raise ValueError("x_train must be (n, d) with matching y_train")
    if x_valid.ndim != 2 or x_valid.shape[1] != x_train.shape[1] or len(x_valid) != len(y_valid):
        raise ValueError("x_valid must be (n, d) with matching y_valid and train dims")
    pos = float(y_train.sum())
    if pos == 0.0 or pos == len(y_train):
        raise ValueError("training labels are single-class; cannot fit a detector")
    if y_valid.min() == y_valid.max():
        raise ValueError("validation labels are single-class; AUC is undefined")

    boundaries = build_bins(x_train, cfg.max_bin)
    n_bins = [len(c) + 1 for c in boundaries]
    binned_train = bin_features(x_train, boundaries)
    binned_valid = bin_features(x_valid, boundaries)

    prior = pos / len(y_train)
    base = math.log(prior / (1.0 - prior))
    ens = TreeEnsemble(config=cfg, base_score=base, bin_boundaries=boundaries, features=features)

    raw_train = np.full(len(y_train), base)
    raw_valid = np.full(len(y_valid), base)
    train_loss: list[float] = []
    valid_auc: list[float] = []
    best_auc = -np.inf
    best_round = 0
    for rnd in range(1, cfg.num_rounds + 1):
        p = sigmoid(raw_train)
        g = p - y_train
        h = p * (1.0 - p)
        tree = _grow_tree(binned_train, g, h, n_bins, cfg)
        if not tree.split_order:
            break  # no structure left to learn
        ens.trees.append(tree)
        raw_train += tree.predict_binned(binned_train)
        raw_valid += tree.predict_binned(binned_valid)
        train_loss.append(_logloss(sigmoid(raw_train), y_train))
        auc = compute_auc(sigmoid(raw_valid), y_valid.astype(np.int64))
        valid_auc.append(auc)
        if auc > best_auc:
            best_auc = auc
            best_round = rnd
        elif rnd - best_round >= cfg.early_stopping_rounds:
            break
    ens.trees = ens.trees[:best_round]
    return ens, GbdtHistory(
        train_loss=tuple(train_loss), valid_auc=tuple(valid_auc), best_round=best_round
    )
