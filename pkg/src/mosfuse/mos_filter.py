"""MOS quantization, band filtering, and class-balance reporting.

Training corpora for spoof detection are heavily imbalanced (far more
spoofed than bonafide utterances), but the two classes overlap in a
band of predicted speech quality. Keeping only records whose MOS falls
inside that band both rebalances the classes and concentrates training
on the hard examples. The helpers here quantize MOS values onto a
fixed grid, apply the band filter, and summarize label balance and MOS
distributions before/after.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .data import DataError, Dataset, ScoreRecord


def quantize_mos(x: float, step: float = 0.125) -> float:
    """Snap a MOS value in [1, 5] to the grid {1, 1+step, ..., 5}.

    Nearest grid point wins; exact midpoints round up. The step must
    divide the [1, 5] range into a whole number of intervals. Grid
    values map to themselves, so quantization is idempotent.
    """
    if not (step > 0):
        raise ValueError(f"step must be positive, got {step!r}")
    n = 4.0 / step
    if abs(n - round(n)) > 1e-9:
        raise ValueError(f"step {step!r} does not divide [1, 5] evenly")
    n = int(round(n))
    x = float(x)
    if not math.isfinite(x) or not 1.0 <= x <= 5.0:
        raise ValueError(f"MOS value {x!r} outside [1, 5]")
    idx = math.floor((x - 1.0) / step + 0.5)  # ties round toward 5
    idx = min(max(idx, 0), n)
    return 1.0 + idx * step


@dataclass(frozen=True)
class FilterConfig:
    """Inclusive-by-default MOS band, defaults [3.0, 4.0]."""

    lo: float = 3.0
    hi: float = 4.0
    inclusive: bool = True

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("filter bounds must be finite")
        if not 0.0 <= self.lo < self.hi <= 5.0:
            raise ValueError(
                f"filter bounds must satisfy 0 <= lo < hi <= 5, got [{self.lo}, {self.hi}]"
            )

    def admits(self, value: float) -> bool:
        if self.inclusive:
            return self.lo <= value <= self.hi
        return self.lo < value < self.hi


def _keyed_mos(record: ScoreRecord, key) -> float:
    if key == "fused":
        if record.mos_fused is None:
            raise DataError(f"utt_id {record.utt_id!r}: mos_fused absent but key='fused'")
        return record.mos_fused
    if isinstance(key, bool) or not isinstance(key, int):
        raise ValueError(f"key must be 'fused' or a component index, got {key!r}")
    if not 0 <= key < len(record.mos):
        raise DataError(
            f"utt_id {record.utt_id!r}: mos component {key} out of range "
            f"(mos_dim={len(record.mos)})"
        )
    return record.mos[key]


def _resolve_key(ds: Dataset, key):
    if key is not None:
        return key
    # default: fused when every record carries it, else component 0
    if len(ds) > 0 and all(r.mos_fused is not None for r in ds.records):
        return "fused"
    if ds.mos_dim >= 1:
        return 0
    raise DataError("dataset has neither fused MOS nor MOS components to filter on")


def filter_by_mos(ds: Dataset, cfg: FilterConfig = FilterConfig(), key=None) -> Dataset:
    """Keep records whose keyed MOS lies in the band; order preserved."""
    key = _resolve_key(ds, key)
    kept = [r for r in ds.records if cfg.admits(_keyed_mos(r, key))]
    return Dataset(kept, fad_dim=ds.fad_dim, mos_dim=ds.mos_dim)


@dataclass(frozen=True)
class BalanceReport:
    """Label counts and the spoof:bonafide ratio of a dataset."""

    total: int
    n_bonafide: int
    n_spoof: int
    n_unknown: int
    ratio: float | None  # n_spoof / n_bonafide; None when undefined

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "n_bonafide": self.n_bonafide,
            "n_spoof": self.n_spoof,
            "n_unknown": self.n_unknown,
            "ratio": self.ratio,
        }


def balance_report(ds: Dataset) -> BalanceReport:
    n_b = sum(1 for r in ds.records if r.label == "bonafide")
    n_s = sum(1 for r in ds.records if r.label == "spoof")
    n_u = len(ds) - n_b - n_s
    ratio = None if n_b == 0 else n_s / n_b
    return BalanceReport(
        total=len(ds), n_bonafide=n_b, n_spoof=n_s, n_unknown=n_u, ratio=ratio
    )


@dataclass(frozen=True)
class MosHistogram:
    """Per-label histogram of a keyed MOS value over [0, 5].

    Bins are left-closed/right-open except the last, which includes
    its right edge so that 5.0 is counted.
    """

    bin_width: float
    edges: tuple[float, ...]
    bonafide: tuple[int, ...]
    spoof: tuple[int, ...]

    def to_dict(self) -> dict:
        return {
            "bin_width": self.bin_width,
            "edges": list(self.edges),
            "bonafide": list(self.bonafide),
            "spoof": list(self.spoof),
        }


def mos_histogram(ds: Dataset, key=None, bin_width: float = 0.25) -> MosHistogram:
    if not (0 < bin_width <= 5):
        raise ValueError(f"bin_width must be in (0, 5], got {bin_width!r}")
    key = _resolve_key(ds, key)
    n_bins = int(math.ceil(5.0 / bin_width - 1e-9))
    edges = tuple(min(i * bin_width, 5.0) for i in range(n_bins)) + (5.0,)
    counts = {"bonafide": [0] * n_bins, "spoof": [0] * n_bins}
    for r in ds.records:
        if r.label not in counts:
            continue
        v = _keyed_mos(r, key)
        # tiny nudge so values that print as bin edges land in the upper bin
        idx = min(int(math.floor(v / bin_width + 1e-9)), n_bins - 1)
        counts[r.label][idx] += 1
    return MosHistogram(
        bin_width=bin_width,
        edges=edges,
        bonafide=tuple(counts["bonafide"]),
        spoof=tuple(counts["spoof"]),
    )
