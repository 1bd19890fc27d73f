"""Seeded minibatch SGD with early stopping on validation loss.

One generator seeded from the config drives both parameter
initialization and epoch shuffling, so a (model, data, config) triple
always trains to bit-identical weights. After each epoch the full
train and validation losses are recorded; training stops once the
validation loss has gone ``patience`` consecutive epochs without a new
strict minimum, and the parameters from the best epoch are returned.

Classifiers (``mlp``, ``gated_mlp``) train on binary cross-entropy
with labels bonafide = 1, spoof = 0. The MOS fuser trains on mean
squared error against each record's fused MOS target.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from . import models
from .data import DataError, Dataset
from .mos_filter import quantize_mos

MODEL_KINDS = ("mlp", "gated_mlp", "mos_fuser")


def bce_loss(pred, label):
    """Elementwise binary cross-entropy, predictions clamped to
    [1e-12, 1 - 1e-12]. Scalars in, scalar out; arrays in, array out."""
    out = models._bce(np.asarray(pred, dtype=np.float64), np.asarray(label, dtype=np.float64))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.001
    batch_size: int = 64
    max_epochs: int = 1000
    patience: int = 20
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")

    def to_dict(self) -> dict:
        return {
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "seed": self.seed,
            "shuffle": self.shuffle,
        }


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    valid_loss: list[float] = field(default_factory=list)
    best_epoch: int = 0    # 1-based epoch with the lowest validation loss
    stopped_epoch: int = 0

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("epoch,train_loss,valid_loss\n")
            for i, (tl, vl) in enumerate(zip(self.train_loss, self.valid_loss), 1):
                fh.write(f"{i},{tl!r},{vl!r}\n")


def _param_fields(params) -> list[str]:
    if isinstance(params, models.MlpParams):
        return ["w1", "w2", "b2"]
    if isinstance(params, models.GatedMlpParams):
        return ["wd", "bd"]  # inner handled separately
    if isinstance(params, models.MosFuserParams):
        return ["w", "a", "b"]
    raise TypeError(f"unknown parameter container {type(params).__name__}")


def _apply_step(params, grads: dict, lr: float) -> None:
    targets = [(params, name) for name in _param_fields(params)]
    if isinstance(params, models.GatedMlpParams):
        targets += [(params.inner, name) for name in _param_fields(params.inner)]
    for holder, name in targets:
        val = getattr(holder, name)
        if isinstance(val, np.ndarray):
            val -= lr * grads[name]
        else:
            setattr(holder, name, val - lr * grads[name])


def _assemble(kind: str, params, ds: Dataset, quantize_targets: bool):
    """Input arrays and targets for one dataset, per model kind."""
    if kind == "mlp":
        return (models.feature_matrix(ds, params.features),), ds.labels01().astype(np.float64)
    if kind == "gated_mlp":
        return (
            ds.fad_matrix(),
            models.mos_input_matrix(ds, params.mos_source),
        ), ds.labels01().astype(np.float64)
    if kind == "mos_fuser":
        target = ds.mos_fused_vector()
        if quantize_targets:
            target = np.array([quantize_mos(v) for v in target])
        return (ds.mos_matrix(),), target
    raise ValueError(f"unknown model kind {kind!r} (expected one of {MODEL_KINDS})")


def _loss_grad(kind: str, params, inputs: tuple, target: np.ndarray):
    if kind == "mlp":
        return models.mlp_loss_grad(params, inputs[0], target)
    if kind == "gated_mlp":
        return models.gated_mlp_loss_grad(params, inputs[0], inputs[1], target)
    return models.mos_fuser_loss_grad(params, inputs[0], target)


def _full_loss(kind: str, params, inputs: tuple, target: np.ndarray) -> float:
    return _loss_grad(kind, params, inputs, target)[0]


def train_model(
    kind: str,
    train: Dataset,
    valid: Dataset,
    cfg: TrainConfig = TrainConfig(),
    *,
    hidden_dim: int = 3,
    features: str = models.FEATURES_FAD,
    mos_source: str = models.MOS_FUSED,
    quantize_targets: bool = False,
):
    """Train one fusion model; returns ``(params, TrainHistory)``.

    ``hidden_dim``/``features`` configure the MLP, ``mos_source`` the
    gated MLP, and ``quantize_targets`` snaps the MOS fuser's targets
    to the quantization grid. Both datasets must be non-empty;
    classifier splits must contain both classes.
    """
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r} (expected one of {MODEL_KINDS})")
    if len(train) == 0 or len(valid) == 0:
        raise DataError("train and valid datasets must be non-empty")
    rng = np.random.default_rng(cfg.seed)
    if kind == "mlp":
        in_dim = train.fad_dim + (1 if features == models.FEATURES_FAD_MOS else 0)
        params = models.init_mlp(in_dim, hidden_dim=hidden_dim, features=features, rng=rng)
    elif kind == "gated_mlp":
        mos_dim = 1 if mos_source == models.MOS_FUSED else train.mos_dim
        params = models.init_gated_mlp(
            train.fad_dim, mos_dim=mos_dim, hidden_dim=hidden_dim,
            mos_source=mos_source, rng=rng,
        )
    else:
        params = models.init_mos_fuser(train.mos_dim, rng=rng)

    tr_inputs, tr_target = _assemble(kind, params, train, quantize_targets)
    va_inputs, va_target = _assemble(kind, params, valid, quantize_targets)
    if kind in ("mlp", "gated_mlp"):
        for name, t in (("train", tr_target), ("valid", va_target)):
            if t.min() == t.max():
                raise DataError(f"{name} split is single-class; cannot train a classifier")

    n = len(train)
    history = TrainHistory()
    best_loss = np.inf
    best_params = copy.deepcopy(params)
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n) if cfg.shuffle else np.arange(n)
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            b_inputs = tuple(a[batch] for a in tr_inputs)
            _, grads = _loss_grad(kind, params, b_inputs, tr_target[batch])
            _apply_step(params, grads, cfg.learning_rate)
        tl = _full_loss(kind, params, tr_inputs, tr_target)
        vl = _full_loss(kind, params, va_inputs, va_target)
        if not (np.isfinite(tl) and np.isfinite(vl)):
            raise RuntimeError(
                f"non-finite loss at epoch {epoch} (train={tl!r}, valid={vl!r}); "
                "try a smaller learning rate"
            )
        history.train_loss.append(tl)
        history.valid_loss.append(vl)
        if vl < best_loss:
            best_loss = vl
            history.best_epoch = epoch
            best_params = copy.deepcopy(params)
        history.stopped_epoch = epoch
        if epoch - history.best_epoch >= cfg.patience:
            break
    return best_params, history


def grad_check(kind: str, params, batch: tuple, eps: float = 1e-4) -> float:
    """Max relative disagreement between analytic and numeric gradients.

    ``batch`` holds the same (inputs..., target) arrays the loss
    routines take. Every parameter coordinate is perturbed by +/- eps
    (central differences) and the largest absolute deviation is
    reported relative to the gradient's own magnitude:

        max_i |analytic_i - numeric_i| / max(|analytic|_inf, |numeric|_inf, 1e-8)

    An exactly-zero gradient therefore checks out as 0.0.
    """
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}")
    *inputs, target = batch
    inputs = tuple(np.asarray(a, dtype=np.float64) for a in inputs)
    target = np.asarray(target, dtype=np.float64)
    _, grads = _loss_grad(kind, params, inputs, target)

    holders = [(params, name) for name in _param_fields(params)]
    if isinstance(params, models.GatedMlpParams):
        holders += [(params.inner, name) for name in _param_fields(params.inner)]

    deviations: list[float] = []
    scale = 1e-8
    for holder, name in holders:
        val = getattr(holder, name)
        analytic = np.atleast_1d(np.asarray(grads[name], dtype=np.float64)).reshape(-1)
        if isinstance(val, np.ndarray):
            flat = val.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                up = _full_loss(kind, params, inputs, target)
                flat[i] = orig - eps
                down = _full_loss(kind, params, inputs, target)
                flat[i] = orig
                numeric = (up - down) / (2.0 * eps)
                deviations.append(abs(analytic[i] - numeric))
                scale = max(scale, abs(analytic[i]), abs(numeric))
        else:
            setattr(holder, name, val + eps)
            up = _full_loss(kind, params, inputs, target)
            setattr(holder, name, val - eps)
            down = _full_loss(kind, params, inputs, target)
            setattr(holder, name, val)
            numeric = (up - down) / (2.0 * eps)
            deviations.append(abs(analytic[0] - numeric))
            scale = max(scale, abs(analytic[0]), abs(numeric))
    return max(deviations) / scale
