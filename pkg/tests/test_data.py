"""Record validation, dataset invariants, and file round-trips."""

import numpy as np
import pytest
from conftest import toy_dataset, toy_records

from mosfuse.data import (
    DataError,
    Dataset,
    ScoreRecord,
    infer_format,
    labeled_subset,
    load_records,
    save_records,
    select_split,
)


def _rec(**kw):
    base = dict(utt_id="a1", label="spoof", split="train", fad=(0.5,), mos=(3.0,))
    base.update(kw)
    return ScoreRecord(**base)


def test_record_accepts_boundary_values():
    r = _rec(fad=(0.0, 1.0), mos=(0.0, 5.0), mos_fused=5.0)
    assert r.fad == (0.0, 1.0)
    assert r.mos == (0.0, 5.0)
    assert r.mos_fused == 5.0
    assert _rec(mos=(), mos_fused=None).mos_fused is None


def test_record_rejects_invalid_fields():
    for kw in (
        dict(utt_id=""),
        dict(label="genuine"),
        dict(split="dev"),
        dict(fad=()),
        dict(fad=(1.2,)),
        dict(fad=(-0.1,)),
        dict(fad=(float("nan"),)),
        dict(mos=(5.4,)),
        dict(mos_fused=-0.2),
        dict(mos_fused=float("inf")),
        dict(label="unknown", split="train"),
    ):
        with pytest.raises(DataError):
            _rec(**kw)


def test_record_unknown_label_only_in_eval():
    r = _rec(label="unknown", split="eval")
    assert r.label == "unknown"


def test_dataset_rejects_duplicates_and_dim_mismatch():
    a = _rec(utt_id="a")
    with pytest.raises(DataError):
        Dataset([a, _rec(utt_id="a")])
    with pytest.raises(DataError):
        Dataset([a, _rec(utt_id="b", fad=(0.1, 0.2))])
    with pytest.raises(DataError):
        Dataset([a, _rec(utt_id="b", mos=(1.0, 2.0))])


def test_dataset_is_immutable():
    ds = toy_dataset(np.random.default_rng(0), 4)
    with pytest.raises(AttributeError):
        ds.records = ()


def test_dataset_matrices_match_records():
    rng = np.random.default_rng(3)
    ds = toy_dataset(rng, 40, fad_dim=5, mos_dim=3)
    fad = np.array([r.fad for r in ds.records])
    mos = np.array([r.mos for r in ds.records])
    fused = np.array([r.mos_fused for r in ds.records])
    y = np.array([1 if r.label == "bonafide" else 0 for r in ds.records])
    assert np.array_equal(ds.fad_matrix(), fad)
    assert np.array_equal(ds.mos_matrix(), mos)
    assert np.array_equal(ds.mos_fused_vector(), fused)
    assert np.array_equal(ds.labels01(), y)
    assert ds.fad_dim == 5 and ds.mos_dim == 3


def test_select_split_and_labeled_subset():
    rng = np.random.default_rng(4)
    recs = (
        toy_records(rng, 10, split="train", prefix="t")
        + toy_records(rng, 5, split="valid", prefix="v")
        + toy_records(rng, 7, split="eval", prefix="e")
    )
    recs.append(
        ScoreRecord(
            utt_id="e-unk",
            label="unknown",
            split="eval",
            fad=(0.5, 0.5, 0.5),
            mos=(3.0, 3.0),
            mos_fused=3.0,
        )
    )
    ds = Dataset(recs)
    for split, n in (("train", 10), ("valid", 5), ("eval", 8)):
        part = select_split(ds, split)
        assert len(part) == n
        assert all(r.split == split for r in part.records)
    lab = labeled_subset(ds)
    assert len(lab) == len(recs) - 1
    assert all(r.label != "unknown" for r in lab.records)
    with pytest.raises(ValueError):
        select_split(ds, "test")


@pytest.mark.parametrize("fmt", ["jsonl", "csv"])
def test_round_trip_is_bit_exact(tmp_path, fmt):
    rng = np.random.default_rng(11)
    ds = toy_dataset(rng, 60, fad_dim=4, mos_dim=2)
    path = tmp_path / f"ds.{fmt}"
    save_records(ds, path, fmt)
    back = load_records(path, fmt)
    assert back.records == ds.records


def test_round_trip_preserves_missing_optionals(tmp_path):
    ds = Dataset([_rec(utt_id="x", mos=(), mos_fused=None)])
    for fmt in ("jsonl", "csv"):
        path = tmp_path / f"m.{fmt}"
        save_records(ds, path, fmt)
        back = load_records(path, fmt)
        assert back.records[0].mos == ()
        assert back.records[0].mos_fused is None


def test_infer_format(tmp_path):
    assert infer_format("a/b.jsonl") == "jsonl"
    assert infer_format("a/b.csv") == "csv"
    with pytest.raises(ValueError):
        infer_format("a/b.parquet")


def test_load_rejects_malformed_files(tmp_path):
    bad_json = tmp_path / "bad.jsonl"
    bad_json.write_text('{"utt_id": "a", "label": "spoof"\n')
    with pytest.raises((DataError, ValueError)):
        load_records(bad_json, "jsonl")
    missing = tmp_path / "missing.jsonl"
    missing.write_text('{"utt_id": "a", "label": "spoof", "split": "train"}\n')
    with pytest.raises((DataError, ValueError)):
        load_records(missing, "jsonl")
