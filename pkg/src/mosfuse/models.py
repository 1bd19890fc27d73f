"""Score-fusion models: MLP, MOS-gated MLP, MOS fuser, threshold wrapper.

Model zoo
---------

``MlpParams``
    Two-layer network: a bias-free first layer with sigmoid hidden
    units, then a single sigmoid output unit with bias. Consumes a
    configurable feature vector (detector scores, optionally with the
    fused MOS appended).

``GatedMlpParams``
    A linear decoder on the MOS input followed by a sigmoid produces a
    per-detector gate in (0, 1)^n; the detector-score vector is gated
    by pointwise multiplication and fed to an inner ``MlpParams``. The
    MOS input is either the fused scalar or the component vector.

``MosFuserParams``
    Weighted MOS combination ``z = clamp(a * (w . mos) + b, 0, 5)``: a
    bias-free weighting layer plus an affine residual mapping back to
    the MOS scale. The clamp applies at inference only; training and
    gradients use the raw affine output.

``ThresholdedModel``
    Decision-level wrapper: records whose fused MOS falls below ``m1``
    score exactly 0.0, above ``m2`` exactly 1.0; in between, the base
    model's score passes through bit-exactly.

Loss-and-gradient routines return the mean loss over a batch together
with analytic gradients for every parameter; they are the single code
path used by both SGD training and finite-difference checking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.special import expit as sigmoid

from . import gbdt as _gbdt
from .data import DataError, Dataset

FEATURES_FAD = "fad"
FEATURES_FAD_MOS = "fad+mos_fused"
FEATURE_CHOICES = (FEATURES_FAD, FEATURES_FAD_MOS)

MOS_FUSED = "fused"
MOS_COMPONENTS = "components"
MOS_SOURCE_CHOICES = (MOS_FUSED, MOS_COMPONENTS)


def feature_matrix(ds: Dataset, features: str) -> np.ndarray:
    """Assemble the model input matrix named by a feature spec."""
    if features == FEATURES_FAD:
        return ds.fad_matrix()
    if features == FEATURES_FAD_MOS:
        return np.column_stack([ds.fad_matrix(), ds.mos_fused_vector()])
    raise ValueError(f"unknown feature spec {features!r}")


def mos_input_matrix(ds: Dataset, source: str) -> np.ndarray:
    """MOS input for the gate decoder: fused scalar column or components."""
    if source == MOS_FUSED:
        return ds.mos_fused_vector().reshape(-1, 1)
    if source == MOS_COMPONENTS:
        return ds.mos_matrix()
    raise ValueError(f"unknown MOS source {source!r}")


def _uniform_init(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


# MLP -----------------------------------------------------------------


@dataclass
class MlpParams:
    w1: np.ndarray  # (hidden, in_dim), no bias on the first layer
    w2: np.ndarray  # (1, hidden)
    b2: np.ndarray  # (1,)
    features: str = FEATURES_FAD

    @property
    def in_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.w1.shape[0]


def init_mlp(
    in_dim: int,
    hidden_dim: int = 3,
    features: str = FEATURES_FAD,
    rng: np.random.Generator | None = None,
) -> MlpParams:
    if in_dim < 1 or hidden_dim < 1:
        raise ValueError("in_dim and hidden_dim must be >= 1")
    if features not in FEATURE_CHOICES:
        raise ValueError(f"unknown feature spec {features!r}")
    rng = rng if rng is not None else np.random.default_rng()
    return MlpParams(
        w1=_uniform_init(rng, (hidden_dim, in_dim), in_dim),
        w2=_uniform_init(rng, (1, hidden_dim), hidden_dim),
        b2=np.zeros(1),
        features=features,
    )


def embedding_hidden_dim(in_dim: int) -> int:
    """Hidden width for wide embedding inputs: half the input dimension."""
    return max(1, in_dim // 2)


def _mlp_scores(p: MlpParams, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    h = sigmoid(x @ p.w1.T)
    s = sigmoid(h @ p.w2.T + p.b2)
    return s[:, 0], h


def mlp_forward(p: MlpParams, x) -> float:
    """Score one feature vector; output lies in (0, 1)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (p.in_dim,):
        raise ValueError(f"expected input of shape ({p.in_dim},), got {x.shape}")
    return float(_mlp_scores(p, x[None, :])[0][0])


def mlp_forward_batch(p: MlpParams, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != p.in_dim:
        raise ValueError(f"expected (n, {p.in_dim}) inputs, got {x.shape}")
    return _mlp_scores(p, x)[0]


def mlp_loss_grad(p: MlpParams, x: np.ndarray, y: np.ndarray):
    """Mean BCE over the batch and its gradients w.r.t. w1, w2, b2."""
    n = x.shape[0]
    s, h = _mlp_scores(p, x)
    loss = float(np.mean(_bce(s, y)))
    dz2 = (s - y) / n                      # d loss / d output pre-activation
    dw2 = (dz2[None, :] @ h)               # (1, hidden)
    db2 = np.array([dz2.sum()])
    dh = np.outer(dz2, p.w2[0])            # (n, hidden)
    dz1 = dh * h * (1.0 - h)
    dw1 = dz1.T @ x                        # (hidden, in_dim)
    return loss, {"w1": dw1, "w2": dw2, "b2": db2}


# gated MLP -----------------------------------------------------------


@dataclass
class GatedMlpParams:
    wd: np.ndarray  # (n_fad, mos_dim) gate decoder weights
    bd: np.ndarray  # (n_fad,) gate decoder bias
    inner: MlpParams
    mos_source: str = MOS_FUSED

    @property
    def fad_dim(self) -> int:
        return self.wd.shape[0]

    @property
    def mos_dim(self) -> int:
        return self.wd.shape[1]


GATE_INIT_SLOPE = 4.0
GATE_INIT_CENTER = 3.0  # midpoint of the 1..5 MOS scale


def init_gated_mlp(
    fad_dim: int,
    mos_dim: int = 1,
    hidden_dim: int = 3,
    mos_source: str = MOS_FUSED,
    rng: np.random.Generator | None = None,
) -> GatedMlpParams:
    """Gate-bank initialization plus a random inner MLP.

    The decoder starts as a bank of steep complementary gates: slopes
    alternate in sign across detectors so half the gates open toward
    low MOS and half toward high, each centered at mid-scale. The inner
    layer can then select
    among pre-formed gating patterns immediately instead of waiting
    for the (slow, second-order) decoder drift away from a flat gate.
    A near-zero decoder start leaves every gate pinned at 0.5 for most
    of a short training budget.
    """
    if fad_dim < 1 or mos_dim < 1:
        raise ValueError("fad_dim and mos_dim must be >= 1")
    if mos_source not in MOS_SOURCE_CHOICES:
        raise ValueError(f"unknown MOS source {mos_source!r}")
    rng = rng if rng is not None else np.random.default_rng()
    signs = np.where(np.arange(fad_dim) % 2 == 0, 1.0, -1.0)
    # each row responds to the mean of its MOS inputs with slope +-SLOPE
    wd = np.tile((GATE_INIT_SLOPE * signs / mos_dim)[:, None], (1, mos_dim))
    bd = -GATE_INIT_CENTER * wd.sum(axis=1)
    inner = init_mlp(fad_dim, hidden_dim=hidden_dim, features=FEATURES_FAD, rng=rng)
    return GatedMlpParams(wd=wd, bd=bd, inner=inner, mos_source=mos_source)


def _gate(p: GatedMlpParams, mos: np.ndarray) -> np.ndarray:
    return sigmoid(mos @ p.wd.T + p.bd)


def gated_mlp_forward(p: GatedMlpParams, fad, mos) -> float:
    """Score one (fad, mos) pair; the gate lives in (0, 1)^n."""
    fad = np.asarray(fad, dtype=np.float64)
    mos = np.asarray(mos, dtype=np.float64)
    if fad.shape != (p.fad_dim,):
        raise ValueError(f"expected fad of shape ({p.fad_dim},), got {fad.shape}")
    if mos.shape != (p.mos_dim,):
        raise ValueError(f"expected mos of shape ({p.mos_dim},), got {mos.shape}")
    g = _gate(p, mos[None, :])
    return float(_mlp_scores(p.inner, fad[None, :] * g)[0][0])


def gated_mlp_forward_batch(p: GatedMlpParams, fad: np.ndarray, mos: np.ndarray) -> np.ndarray:
    fad = np.asarray(fad, dtype=np.float64)
    mos = np.asarray(mos, dtype=np.float64)
    if fad.ndim != 2 or fad.shape[1] != p.fad_dim:
        raise ValueError(f"expected (n, {p.fad_dim}) fad inputs, got {fad.shape}")
    if mos.ndim != 2 or mos.shape != (fad.shape[0], p.mos_dim):
        raise ValueError(f"expected ({fad.shape[0]}, {p.mos_dim}) mos inputs, got {mos.shape}")
    return _mlp_scores(p.inner, fad * _gate(p, mos))[0]


def gated_mlp_loss_grad(p: GatedMlpParams, fad: np.ndarray, mos: np.ndarray, y: np.ndarray):
    """Mean BCE and gradients w.r.t. wd, bd and the inner MLP weights."""
    n = fad.shape[0]
    g = _gate(p, mos)
    u = fad * g
    s, h = _mlp_scores(p.inner, u)
    loss = float(np.mean(_bce(s, y)))
    dz2 = (s - y) / n
    dw2 = dz2[None, :] @ h
    db2 = np.array([dz2.sum()])
    dh = np.outer(dz2, p.inner.w2[0])
    dz1 = dh * h * (1.0 - h)
    dw1 = dz1.T @ u
    du = dz1 @ p.inner.w1                  # (n, n_fad)
    dzd = du * fad * g * (1.0 - g)
    dwd = dzd.T @ mos
    dbd = dzd.sum(axis=0)
    return loss, {"wd": dwd, "bd": dbd, "w1": dw1, "w2": dw2, "b2": db2}


# MOS fuser -----------------------------------------------------------


@dataclass
class MosFuserParams:
    w: np.ndarray  # (mos_dim,), no bias on the weighting layer
    a: float
    b: float

    @property
    def mos_dim(self) -> int:
        return self.w.shape[0]


def init_mos_fuser(mos_dim: int, rng: np.random.Generator | None = None) -> MosFuserParams:
    if mos_dim < 1:
        raise ValueError("mos_dim must be >= 1")
    rng = rng if rng is not None else np.random.default_rng()
    return MosFuserParams(
        w=_uniform_init(rng, (mos_dim,), mos_dim),
        a=float(_uniform_init(rng, (), 1)),
        b=0.0,
    )


def _mos_fuser_raw(p: MosFuserParams, mos: np.ndarray) -> np.ndarray:
    return p.a * (mos @ p.w) + p.b


def mos_fuser_forward(p: MosFuserParams, mos) -> float:
    """Fused MOS for one component vector, clamped to [0, 5]."""
    mos = np.asarray(mos, dtype=np.float64)
    if mos.shape != (p.mos_dim,):
        raise ValueError(f"expected mos of shape ({p.mos_dim},), got {mos.shape}")
    return float(np.clip(_mos_fuser_raw(p, mos[None, :])[0], 0.0, 5.0))


def mos_fuser_forward_batch(p: MosFuserParams, mos: np.ndarray) -> np.ndarray:
    mos = np.asarray(mos, dtype=np.float64)
    if mos.ndim != 2 or mos.shape[1] != p.mos_dim:
        raise ValueError(f"expected (n, {p.mos_dim}) mos inputs, got {mos.shape}")
    return np.clip(_mos_fuser_raw(p, mos), 0.0, 5.0)


def mos_fuser_loss_grad(p: MosFuserParams, mos: np.ndarray, target: np.ndarray):
    """Mean squared error on the raw (unclamped) output and its gradients."""
    n = mos.shape[0]
    t = mos @ p.w
    raw = p.a * t + p.b
    r = raw - target
    loss = float(np.mean(r * r))
    dr = 2.0 * r / n
    return loss, {"w": p.a * (dr @ mos), "a": float(dr @ t), "b": float(dr.sum())}


# thresholding --------------------------------------------------------


@dataclass(frozen=True)
class ThresholdConfig:
    """Decision thresholds on the fused MOS scale."""

    m1: float = 2.5
    m2: float = 4.0

    def __post_init__(self):
        if not (math.isfinite(self.m1) and math.isfinite(self.m2)):
            raise ValueError("thresholds must be finite")
        if not 0.0 <= self.m1 < self.m2 <= 5.0:
            raise ValueError(
                f"thresholds must satisfy 0 <= m1 < m2 <= 5, got ({self.m1}, {self.m2})"
            )


def apply_threshold(cfg: ThresholdConfig, z_f: float, base_score: float) -> float:
    """Hard MOS decision rule; boundary values pass the base score through."""
    if not 0.0 <= z_f <= 5.0:
        raise ValueError(f"fused MOS {z_f!r} outside [0, 5]")
    if z_f < cfg.m1:
        return 0.0
    if z_f > cfg.m2:
        return 1.0
    return base_score


@dataclass(frozen=True)
class ThresholdedModel:
    """Wraps any base fusion model with the hard MOS decision rule."""

    base: "FusionModel"
    cfg: ThresholdConfig = ThresholdConfig()


# prediction dispatch -------------------------------------------------

FusionModel = Union[MlpParams, GatedMlpParams, MosFuserParams, ThresholdedModel, "_gbdt.TreeEnsemble"]


def predict_batch(model: FusionModel, ds: Dataset) -> np.ndarray:
    """Score every record of a dataset with any fusion model.

    Classifier outputs lie in (0, 1) (exactly {0, 1} where a threshold
    wrapper fires); the MOS fuser outputs on the [0, 5] MOS scale.
    """
    if isinstance(model, ThresholdedModel):
        base = predict_batch(model.base, ds)
        z = ds.mos_fused_vector()
        if np.any(z < 0.0) or np.any(z > 5.0):
            raise ValueError("fused MOS outside [0, 5]")
        return np.where(z < model.cfg.m1, 0.0, np.where(z > model.cfg.m2, 1.0, base))
    if isinstance(model, MlpParams):
        return mlp_forward_batch(model, feature_matrix(ds, model.features))
    if isinstance(model, GatedMlpParams):
        return gated_mlp_forward_batch(
            model, ds.fad_matrix(), mos_input_matrix(ds, model.mos_source)
        )
    if isinstance(model, MosFuserParams):
        return mos_fuser_forward_batch(model, ds.mos_matrix())
    if isinstance(model, _gbdt.TreeEnsemble):
        return _gbdt.predict_batch_ensemble(model, feature_matrix(ds, model.features))
    raise TypeError(f"unknown model type {type(model).__name__}")


def _bce(pred: np.ndarray, label: np.ndarray) -> np.ndarray:
    p = np.clip(pred, 1e-12, 1.0 - 1e-12)
    return -(label * np.log(p) + (1.0 - label) * np.log1p(-p))
