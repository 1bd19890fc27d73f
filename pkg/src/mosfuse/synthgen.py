"""Synthetic detection benchmark with a known Bayes-optimal oracle.

Generative story per record:

1. Label: spoof with probability ``spoof_prior``, else bonafide.
2. True quality q: bonafide draws from a truncated normal on [1, 5];
   spoof draws from a truncated two-component normal mixture whose
   mass sits mostly below the bonafide bulk.
3. Observed MOS vector: q plus per-system observation noise, clamped
   to [0, 5]; the fused MOS is the clamped mean of the observations.
4. Detector scores: each system i is *informative* only while q lies
   inside its regime interval. With s = +1 for spoof and -1 for
   bonafide, and a shared per-record nuisance u ~ N(0, shared_noise_sd)
   that correlates all systems,

       informative:   fad_i = sigmoid(-slope * s + u + N(0, informative_noise_sd))
       uninformative: fad_i = sigmoid(u + N(0, uninformative_noise_sd))

   so informative systems push bonafide toward 1 and spoof toward 0.

Every record draws from its own seeded substream (split -> record),
so generation order never changes the output and parallel generation
would reproduce the sequential corpus byte for byte.

``bayes_posteriors`` evaluates the exact posterior P(bonafide | mos,
fad) under this story, marginalizing u with Gauss-Hermite quadrature
and q with per-segment Gauss-Legendre quadrature (segments split at
regime endpoints, where the likelihood is discontinuous in q). MOS
observations sitting exactly on a clamp boundary (0 or 5) enter the
likelihood as censored tail masses. The oracle posterior upper-bounds
what any trained model can achieve on this benchmark.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields, replace

import numpy as np
from scipy.special import expit as sigmoid
from scipy.special import log_ndtr, logit

from .data import Dataset, ScoreRecord
from .metrics import compute_eer

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GenConfig:
    """Benchmark parameters. Defaults give a 9:1 spoof-heavy corpus
    whose MOS band [3, 4] is roughly class-balanced."""

    n_train: int = 25000
    n_valid: int = 2500
    n_eval: int = 5000
    spoof_prior: float = 0.9
    mos_bonafide_mean: float = 4.1
    mos_bonafide_sd: float = 0.6
    mos_spoof_means: tuple[float, ...] = (2.0, 3.2)
    mos_spoof_sds: tuple[float, ...] = (0.5, 0.28)
    mos_spoof_weights: tuple[float, ...] = (0.965, 0.035)
    n_fad_systems: int = 7
    regimes: tuple[tuple[float, float], ...] | None = None
    informative_slope: float = 4.0
    informative_noise_sd: float = 0.5
    uninformative_noise_sd: float = 1.0
    shared_noise_sd: float = 1.5
    mos_obs_sd: float = 0.2
    seed: int = 42

    def __post_init__(self):
        if min(self.n_train, self.n_valid, self.n_eval) < 0:
            raise ValueError("split sizes must be >= 0")
        if not 0.0 < self.spoof_prior < 1.0:
            raise ValueError("spoof_prior must lie strictly inside (0, 1)")
        if self.n_fad_systems < 1:
            raise ValueError("n_fad_systems must be >= 1")
        k = len(self.mos_spoof_means)
        if not (len(self.mos_spoof_sds) == len(self.mos_spoof_weights) == k) or k < 1:
            raise ValueError("spoof mixture means/sds/weights must have equal length >= 1")
        if abs(sum(self.mos_spoof_weights) - 1.0) > 1e-9 or min(self.mos_spoof_weights) <= 0:
            raise ValueError("spoof mixture weights must be positive and sum to 1")
        if min(self.mos_spoof_sds) <= 0 or self.mos_bonafide_sd <= 0:
            raise ValueError("MOS standard deviations must be positive")
        for sd in (self.informative_noise_sd, self.uninformative_noise_sd, self.mos_obs_sd):
            if sd <= 0:
                raise ValueError("noise standard deviations must be positive")
        if self.shared_noise_sd < 0:
            raise ValueError("shared_noise_sd must be >= 0")
        if self.informative_slope < 0:
            raise ValueError("informative_slope must be >= 0")
        object.__setattr__(self, "mos_spoof_means", tuple(float(v) for v in self.mos_spoof_means))
        object.__setattr__(self, "mos_spoof_sds", tuple(float(v) for v in self.mos_spoof_sds))
        object.__setattr__(
            self, "mos_spoof_weights", tuple(float(v) for v in self.mos_spoof_weights)
        )
        regimes = self.regimes
        if regimes is None:
            # the first half of the systems is tuned to low quality, the rest
            # to high quality; neither half extends to the scale extremes,
            # so records below 1.6 or above 4.8 fall in no system's
            # competence region and carry only nuisance-driven scores
            lo_systems = self.n_fad_systems // 2
            regimes = tuple(
                (1.6, 3.25) if i < lo_systems else (3.25, 4.8)
                for i in range(self.n_fad_systems)
            )
        regimes = tuple((float(lo), float(hi)) for lo, hi in regimes)
        if len(regimes) != self.n_fad_systems:
            raise ValueError("one regime interval is required per detector system")
        for lo, hi in regimes:
            if not 1.0 <= lo < hi <= 5.0:
                raise ValueError(f"regime ({lo}, {hi}) must satisfy 1 <= lo < hi <= 5")
        object.__setattr__(self, "regimes", regimes)

    def to_dict(self) -> dict:
        return {
            "n_train": self.n_train,
            "n_valid": self.n_valid,
            "n_eval": self.n_eval,
            "spoof_prior": self.spoof_prior,
            "mos_bonafide_mean": self.mos_bonafide_mean,
            "mos_bonafide_sd": self.mos_bonafide_sd,
            "mos_spoof_means": list(self.mos_spoof_means),
            "mos_spoof_sds": list(self.mos_spoof_sds),
            "mos_spoof_weights": list(self.mos_spoof_weights),
            "n_fad_systems": self.n_fad_systems,
            "regimes": [list(r) for r in self.regimes],
            "informative_slope": self.informative_slope,
            "informative_noise_sd": self.informative_noise_sd,
            "uninformative_noise_sd": self.uninformative_noise_sd,
            "shared_noise_sd": self.shared_noise_sd,
            "mos_obs_sd": self.mos_obs_sd,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "GenConfig":
        if not isinstance(obj, dict):
            raise ValueError("generator config must be a JSON object")
        known = {f.name for f in fields(cls)}
        extra = set(obj) - known
        if extra:
            raise ValueError(f"unknown generator config keys {sorted(extra)}")
        kwargs = dict(obj)
        for key in ("mos_spoof_means", "mos_spoof_sds", "mos_spoof_weights"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        if kwargs.get("regimes") is not None:
            kwargs["regimes"] = tuple(tuple(r) for r in kwargs["regimes"])
        return cls(**kwargs)


def _trunc_normal(rng: np.random.Generator, mean: float, sd: float) -> float:
    # rejection sampling on [1, 5]; fine for any reasonably placed component
    for _ in range(10000):
        x = rng.normal(mean, sd)
        if 1.0 <= x <= 5.0:
            return x
    raise RuntimeError(
        f"truncated normal ({mean}, {sd}) kept rejecting; essentially no mass in [1, 5]"
    )


def _draw_quality(rng: np.random.Generator, cfg: GenConfig, spoof: bool) -> float:
    if not spoof:
        return _trunc_normal(rng, cfg.mos_bonafide_mean, cfg.mos_bonafide_sd)
    r = rng.random()
    acc = 0.0
    comp = len(cfg.mos_spoof_weights) - 1
    for i, w in enumerate(cfg.mos_spoof_weights):
        acc += w
        if r < acc:
            comp = i
            break
    return _trunc_normal(rng, cfg.mos_spoof_means[comp], cfg.mos_spoof_sds[comp])


def _gen_record(rng: np.random.Generator, cfg: GenConfig, split: str, index: int) -> ScoreRecord:
    spoof = rng.random() < cfg.spoof_prior
    q = _draw_quality(rng, cfg, spoof)
    mos = np.clip(q + rng.normal(0.0, cfg.mos_obs_sd, size=cfg.n_fad_systems), 0.0, 5.0)
    mos_fused = float(np.clip(mos.mean(), 0.0, 5.0))
    s = 1.0 if spoof else -1.0
    u = rng.normal(0.0, cfg.shared_noise_sd) if cfg.shared_noise_sd > 0 else 0.0
    fad = np.empty(cfg.n_fad_systems)
    for i, (lo, hi) in enumerate(cfg.regimes):
        if lo <= q <= hi:
            z = -cfg.informative_slope * s + u + rng.normal(0.0, cfg.informative_noise_sd)
        else:
            z = u + rng.normal(0.0, cfg.uninformative_noise_sd)
        fad[i] = sigmoid(z)
    return ScoreRecord(
        utt_id=f"{split}-{index:06d}",
        label="spoof" if spoof else "bonafide",
        split=split,
        fad=tuple(fad),
        mos=tuple(mos),
        mos_fused=mos_fused,
    )


def generate(cfg: GenConfig = GenConfig(), seed: int | None = None) -> Dataset:
    """Generate the full three-split corpus for one seed."""
    seed = cfg.seed if seed is None else seed
    split_sizes = (("train", cfg.n_train), ("valid", cfg.n_valid), ("eval", cfg.n_eval))
    split_streams = np.random.SeedSequence(seed).spawn(len(split_sizes))
    records = []
    for (split, size), ss in zip(split_sizes, split_streams):
        for index, child in enumerate(ss.spawn(size)):
            records.append(_gen_record(np.random.default_rng(child), cfg, split, index))
    return Dataset(records, fad_dim=cfg.n_fad_systems, mos_dim=cfg.n_fad_systems)


# Bayes oracle ---------------------------------------------------------


def _log_trunc_normal_pdf(q: np.ndarray, mean: float, sd: float) -> np.ndarray:
    z_lo = (1.0 - mean) / sd
    z_hi = (5.0 - mean) / sd
    log_mass = log_ndtr(z_hi) + math.log1p(-math.exp(log_ndtr(z_lo) - log_ndtr(z_hi)))
    r = (q - mean) / sd
    return -0.5 * r * r - _LOG_SQRT_2PI - math.log(sd) - log_mass


def _log_q_density(q: np.ndarray, cfg: GenConfig, spoof: bool) -> np.ndarray:
    if not spoof:
        return _log_trunc_normal_pdf(q, cfg.mos_bonafide_mean, cfg.mos_bonafide_sd)
    parts = [
        math.log(w) + _log_trunc_normal_pdf(q, m, sd)
        for w, m, sd in zip(cfg.mos_spoof_weights, cfg.mos_spoof_means, cfg.mos_spoof_sds)
    ]
    stacked = np.stack(parts)
    top = stacked.max(axis=0)
    return top + np.log(np.exp(stacked - top).sum(axis=0))


def _log_mos_likelihood(mos: np.ndarray, q: float, sd: float) -> np.ndarray:
    """Sum over systems of log p(observed mos | q); clamped values are
    censored into the matching tail mass. Returns one value per record."""
    out = np.empty(mos.shape)
    at_lo = mos <= 0.0
    at_hi = mos >= 5.0
    mid = ~(at_lo | at_hi)
    r = (mos - q) / sd
    out[mid] = -0.5 * r[mid] * r[mid] - _LOG_SQRT_2PI - math.log(sd)
    if at_lo.any():
        out[at_lo] = log_ndtr((0.0 - q) / sd)
    if at_hi.any():
        out[at_hi] = log_ndtr((q - 5.0) / sd)
    return out.sum(axis=1)


def _quadrature_nodes(cfg: GenConfig, n_per_segment: int = 24):
    cut_set = {1.0, 5.0}
    for lo, hi in cfg.regimes:
        cut_set.update((lo, hi))
    cuts = sorted(c for c in cut_set if 1.0 <= c <= 5.0)
    x, w = np.polynomial.legendre.leggauss(n_per_segment)
    nodes, weights = [], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        half = 0.5 * (b - a)
        nodes.append(half * x + 0.5 * (a + b))
        weights.append(half * w)
    return np.concatenate(nodes), np.concatenate(weights)


def bayes_posteriors(cfg: GenConfig, ds: Dataset, n_hermite: int = 40) -> np.ndarray:
    """Exact posterior P(bonafide | mos, fad) for every record.

    The fused MOS is a deterministic function of the observed vector,
    so it contributes no extra evidence and is ignored. Requires
    ``n_hermite >= 32`` nodes for the shared-noise marginalization.
    """
    if n_hermite < 32:
        raise ValueError("n_hermite must be >= 32")
    if len(ds) == 0:
        return np.zeros(0)
    if ds.fad_dim != cfg.n_fad_systems or ds.mos_dim != cfg.n_fad_systems:
        raise ValueError(
            f"dataset dims (fad={ds.fad_dim}, mos={ds.mos_dim}) do not match "
            f"config n_fad_systems={cfg.n_fad_systems}"
        )
    mos = ds.mos_matrix()
    v = logit(np.clip(ds.fad_matrix(), 1e-15, 1.0 - 1e-15))  # scores live in (0, 1)

    hx, hw = np.polynomial.hermite.hermgauss(n_hermite)
    u_nodes = math.sqrt(2.0) * cfg.shared_noise_sd * hx
    log_hw = np.log(hw) - 0.5 * math.log(math.pi)

    q_nodes, q_weights = _quadrature_nodes(cfg)
    log_qw = np.log(q_weights)

    regimes = np.array(cfg.regimes)
    n_rec = len(ds)
    log_like = {True: [], False: []}  # keyed by spoof flag; one entry per q node
    for qi, q in enumerate(q_nodes):
        informative = (regimes[:, 0] <= q) & (q <= regimes[:, 1])
        sd_i = np.where(informative, cfg.informative_noise_sd, cfg.uninformative_noise_sd)
        log_norm = float(np.sum(-np.log(sd_i) - _LOG_SQRT_2PI))
        inv_var = 1.0 / (sd_i * sd_i)
        sum_inv_var = float(inv_var.sum())
        for spoof in (False, True):
            s = 1.0 if spoof else -1.0
            c = np.where(informative, -cfg.informative_slope * s, 0.0)
            dev = v - c  # (n_rec, n_sys)
            alpha = -0.5 * np.sum(dev * dev * inv_var, axis=1)
            beta = np.sum(dev * inv_var, axis=1)
            # joint log N(v | c + u, sd) over systems is quadratic in u
            a_mat = (
                alpha[:, None]
                + np.outer(beta, u_nodes)
                - 0.5 * sum_inv_var * u_nodes[None, :] ** 2
                + log_norm
                + log_hw[None, :]
            )
            top = a_mat.max(axis=1)
            log_fad = top + np.log(np.exp(a_mat - top[:, None]).sum(axis=1))
            term = (
                math.log(q_weights[qi])
                + _log_q_density(np.array([q]), cfg, spoof)[0]
                + _log_mos_likelihood(mos, float(q), cfg.mos_obs_sd)
                + log_fad
            )
            log_like[spoof].append(term)

    def _reduce(parts: list[np.ndarray]) -> np.ndarray:
        stacked = np.stack(parts)
        top = stacked.max(axis=0)
        return top + np.log(np.exp(stacked - top).sum(axis=0))

    log_bona = _reduce(log_like[False]) + math.log(1.0 - cfg.spoof_prior)
    log_spoof = _reduce(log_like[True]) + math.log(cfg.spoof_prior)
    return sigmoid(log_bona - log_spoof)


def bayes_posterior(cfg: GenConfig, record: ScoreRecord, n_hermite: int = 40) -> float:
    """Posterior for a single record (see ``bayes_posteriors``)."""
    ds = Dataset([record])
    return float(bayes_posteriors(cfg, ds, n_hermite=n_hermite)[0])


def oracle_eer(cfg: GenConfig, ds: Dataset, n_hermite: int = 40) -> float:
    """EER of the exact Bayes posterior on a labeled dataset."""
    return compute_eer(bayes_posteriors(cfg, ds, n_hermite=n_hermite), ds.labels01())[0]
