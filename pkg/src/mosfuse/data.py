"""Score records and dataset persistence.

A record carries everything known about one utterance: a ground-truth
label (``bonafide``/``spoof``, or ``unknown`` for blind eval data), a
split tag, a vector of detector scores in [0, 1] (higher = more likely
bonafide), a vector of per-system MOS quality predictions in [0, 5],
and an optional fused MOS scalar.

Two file formats are supported. JSONL is the canonical format: one
object per line with keys ``utt_id``, ``label``, ``split``, ``fad``,
``mos`` and optional ``mos_fused``. CSV is the interchange format with
header ``utt_id,label,split,mos_fused,fad_0..fad_{n-1},mos_0..mos_{m-1}``
(empty cell = absent fused MOS). Both round-trip float values exactly.
Any malformed or non-finite value is rejected at load time with a
diagnostic naming the offending line or utt_id.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

LABELS = ("bonafide", "spoof", "unknown")
SPLITS = ("train", "valid", "eval")

_JSONL_REQUIRED = ("utt_id", "label", "split", "fad", "mos")
_JSONL_ALLOWED = frozenset(_JSONL_REQUIRED + ("mos_fused",))


class DataError(ValueError):
    """A record or file violates the dataset contract."""


def _as_float_tuple(values, what: str, utt_id: str) -> tuple[float, ...]:
    if isinstance(values, (str, bytes)) or not isinstance(values, (list, tuple)):
        raise DataError(f"utt_id {utt_id!r}: {what} must be a sequence of numbers")
    out = []
    for i, v in enumerate(values):
        if isinstance(v, bool) or not isinstance(v, (int, float, np.integer, np.floating)):
            raise DataError(f"utt_id {utt_id!r}: {what}[{i}] is not a number")
        out.append(float(v))
    return tuple(out)


@dataclass(frozen=True)
class ScoreRecord:
    """One utterance worth of scores. Validated on construction."""

    utt_id: str
    label: str
    split: str
    fad: tuple[float, ...]
    mos: tuple[float, ...] = ()
    mos_fused: float | None = None

    def __post_init__(self):
        if not isinstance(self.utt_id, str) or not self.utt_id:
            raise DataError("record with empty utt_id")
        if self.label not in LABELS:
            raise DataError(f"utt_id {self.utt_id!r}: unknown label {self.label!r}")
        if self.split not in SPLITS:
            raise DataError(f"utt_id {self.utt_id!r}: unknown split {self.split!r}")
        if self.label == "unknown" and self.split != "eval":
            raise DataError(
                f"utt_id {self.utt_id!r}: label 'unknown' is only permitted in the eval split"
            )
        object.__setattr__(self, "fad", _as_float_tuple(self.fad, "fad", self.utt_id))
        object.__setattr__(self, "mos", _as_float_tuple(self.mos, "mos", self.utt_id))
        if len(self.fad) == 0:
            raise DataError(f"utt_id {self.utt_id!r}: fad vector must be non-empty")
        for i, v in enumerate(self.fad):
            if not math.isfinite(v) or not 0.0 <= v <= 1.0:
                raise DataError(f"utt_id {self.utt_id!r}: fad[{i}]={v!r} outside [0, 1]")
        for i, v in enumerate(self.mos):
            if not math.isfinite(v) or not 0.0 <= v <= 5.0:
                raise DataError(f"utt_id {self.utt_id!r}: mos[{i}]={v!r} outside [0, 5]")
        if self.mos_fused is not None:
            if isinstance(self.mos_fused, bool) or not isinstance(
                self.mos_fused, (int, float, np.integer, np.floating)
            ):
                raise DataError(f"utt_id {self.utt_id!r}: mos_fused is not a number")
            v = float(self.mos_fused)
            if not math.isfinite(v) or not 0.0 <= v <= 5.0:
                raise DataError(f"utt_id {self.utt_id!r}: mos_fused={v!r} outside [0, 5]")
            object.__setattr__(self, "mos_fused", v)

    def to_json_obj(self) -> dict:
        obj = {
            "utt_id": self.utt_id,
            "label": self.label,
            "split": self.split,
            "fad": list(self.fad),
            "mos": list(self.mos),
        }
        if self.mos_fused is not None:
            obj["mos_fused"] = self.mos_fused
        return obj


class Dataset:
    """Immutable ordered collection of records with consistent dimensions.

    All records share one fad dimension and one mos dimension; utt_ids
    are unique. ``fad_dim``/``mos_dim`` may be passed explicitly so that
    an empty dataset still knows its shape.
    """

    __slots__ = ("records", "fad_dim", "mos_dim")

    def __init__(
        self,
        records: Iterable[ScoreRecord] | Sequence[ScoreRecord] = (),
        fad_dim: int | None = None,
        mos_dim: int | None = None,
    ):
        recs = tuple(records)
        seen: set[str] = set()
        for r in recs:
            if not isinstance(r, ScoreRecord):
                raise DataError("Dataset accepts ScoreRecord instances only")
            if r.utt_id in seen:
                raise DataError(f"duplicate utt_id {r.utt_id!r}")
            seen.add(r.utt_id)
        if recs:
            n, m = len(recs[0].fad), len(recs[0].mos)
            for r in recs:
                if len(r.fad) != n:
                    raise DataError(
                        f"utt_id {r.utt_id!r}: fad dimension {len(r.fad)} != {n}"
                    )
                if len(r.mos) != m:
                    raise DataError(
                        f"utt_id {r.utt_id!r}: mos dimension {len(r.mos)} != {m}"
                    )
            if fad_dim is not None and fad_dim != n:
                raise DataError(f"declared fad_dim {fad_dim} != observed {n}")
            if mos_dim is not None and mos_dim != m:
                raise DataError(f"declared mos_dim {mos_dim} != observed {m}")
            fad_dim, mos_dim = n, m
        object.__setattr__(self, "records", recs)
        object.__setattr__(self, "fad_dim", int(fad_dim or 0))
        object.__setattr__(self, "mos_dim", int(mos_dim or 0))

    def __setattr__(self, name, value):
        raise AttributeError("Dataset is immutable")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i) -> ScoreRecord:
        return self.records[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.records == other.records
            and self.fad_dim == other.fad_dim
            and self.mos_dim == other.mos_dim
        )

    def __repr__(self) -> str:
        return (
            f"Dataset(n={len(self.records)}, fad_dim={self.fad_dim}, "
            f"mos_dim={self.mos_dim})"
        )

    # numpy views -----------------------------------------------------

    def fad_matrix(self) -> np.ndarray:
        """(n_records, fad_dim) float64 matrix of detector scores."""
        if not self.records:
            return np.zeros((0, self.fad_dim))
        return np.array([r.fad for r in self.records], dtype=np.float64)

    def mos_matrix(self) -> np.ndarray:
        """(n_records, mos_dim) float64 matrix of MOS predictions."""
        if not self.records:
            return np.zeros((0, self.mos_dim))
        return np.array([r.mos for r in self.records], dtype=np.float64)

    def mos_fused_vector(self) -> np.ndarray:
        """(n_records,) fused MOS values; every record must carry one."""
        out = np.empty(len(self.records))
        for i, r in enumerate(self.records):
            if r.mos_fused is None:
                raise DataError(f"utt_id {r.utt_id!r}: mos_fused is required but absent")
            out[i] = r.mos_fused
        return out

    def labels01(self) -> np.ndarray:
        """(n_records,) int labels, bonafide -> 1 and spoof -> 0."""
        out = np.empty(len(self.records), dtype=np.int64)
        for i, r in enumerate(self.records):
            if r.label == "unknown":
                raise DataError(f"utt_id {r.utt_id!r}: label 'unknown' cannot be encoded")
            out[i] = 1 if r.label == "bonafide" else 0
        return out


def select_split(ds: Dataset, split: str) -> Dataset:
    """Records of one split, order preserved; empty result keeps dims."""
    if split not in SPLITS:
        raise DataError(f"unknown split {split!r}")
    return Dataset(
        [r for r in ds.records if r.split == split],
        fad_dim=ds.fad_dim,
        mos_dim=ds.mos_dim,
    )


def labeled_subset(ds: Dataset) -> Dataset:
    """Records with a known label, order preserved."""
    return Dataset(
        [r for r in ds.records if r.label != "unknown"],
        fad_dim=ds.fad_dim,
        mos_dim=ds.mos_dim,
    )


# persistence ---------------------------------------------------------


def _record_from_json_obj(obj, lineno: int) -> ScoreRecord:
    if not isinstance(obj, dict):
        raise DataError(f"line {lineno}: expected a JSON object")
    extra = set(obj) - _JSONL_ALLOWED
    if extra:
        raise DataError(f"line {lineno}: unexpected keys {sorted(extra)}")
    missing = [k for k in _JSONL_REQUIRED if k not in obj]
    if missing:
        raise DataError(f"line {lineno}: missing keys {missing}")
    try:
        return ScoreRecord(
            utt_id=obj["utt_id"],
            label=obj["label"],
            split=obj["split"],
            fad=obj["fad"],
            mos=obj["mos"],
            mos_fused=obj.get("mos_fused"),
        )
    except DataError as e:
        raise DataError(f"line {lineno}: {e}") from None


def _load_jsonl(path) -> Dataset:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                raise DataError(f"{path}: line {lineno}: blank line")
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}: line {lineno}: invalid JSON ({e.msg})") from None
            records.append(_record_from_json_obj(obj, lineno))
    return Dataset(records)


def _csv_header(fad_dim: int, mos_dim: int) -> list[str]:
    return (
        ["utt_id", "label", "split", "mos_fused"]
        + [f"fad_{i}" for i in range(fad_dim)]
        + [f"mos_{i}" for i in range(mos_dim)]
    )


def _load_csv(path) -> Dataset:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty CSV file (header required)") from None
        n = sum(1 for c in header if c.startswith("fad_"))
        m = sum(1 for c in header if c.startswith("mos_") and c != "mos_fused")
        if header != _csv_header(n, m):
            raise DataError(f"{path}: line 1: malformed header {header!r}")
        records = []
        for lineno, row in enumerate(reader, 2):
            if len(row) != len(header):
                raise DataError(
                    f"{path}: line {lineno}: expected {len(header)} cells, got {len(row)}"
                )
            utt_id, label, split, fused_cell = row[0], row[1], row[2], row[3]
            try:
                fused = None if fused_cell == "" else float(fused_cell)
                fad = [float(c) for c in row[4 : 4 + n]]
                mos = [float(c) for c in row[4 + n :]]
                records.append(
                    ScoreRecord(
                        utt_id=utt_id, label=label, split=split,
                        fad=fad, mos=mos, mos_fused=fused,
                    )
                )
            except DataError as e:
                raise DataError(f"{path}: line {lineno}: {e}") from None
            except ValueError:
                raise DataError(f"{path}: line {lineno}: non-numeric cell") from None
        return Dataset(records, fad_dim=n, mos_dim=m)


def load_records(path, fmt: str = "jsonl") -> Dataset:
    """Load a dataset, validating every invariant at read time."""
    if fmt == "jsonl":
        return _load_jsonl(path)
    if fmt == "csv":
        return _load_csv(path)
    raise DataError(f"unknown format {fmt!r} (expected 'jsonl' or 'csv')")


def save_records(ds: Dataset, path, fmt: str = "jsonl") -> None:
    """Write a dataset; floats keep full round-trip precision."""
    if fmt == "jsonl":
        with open(path, "w", encoding="utf-8") as fh:
            for r in ds.records:
                fh.write(json.dumps(r.to_json_obj(), separators=(",", ":")) + "\n")
    elif fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(_csv_header(ds.fad_dim, ds.mos_dim))
            for r in ds.records:
                fused = "" if r.mos_fused is None else repr(r.mos_fused)
                writer.writerow(
                    [r.utt_id, r.label, r.split, fused]
                    + [repr(v) for v in r.fad]
                    + [repr(v) for v in r.mos]
                )
    else:
        raise DataError(f"unknown format {fmt!r} (expected 'jsonl' or 'csv')")


def infer_format(path) -> str:
    """Map a file suffix to a format name ('.jsonl'/'.csv')."""
    s = str(path)
    if s.endswith(".jsonl"):
        return "jsonl"
    if s.endswith(".csv"):
        return "csv"
    raise DataError(f"cannot infer format from {s!r}; expected .jsonl or .csv")
