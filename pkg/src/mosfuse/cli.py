"""Command-line front end for batch fusion experiments.

Subcommands cover the full pipeline: ``gen`` (synthetic corpus),
``filter`` (MOS band filtering), ``train`` (any fusion model),
``eval`` (scores + metrics + optional significance test), and
``report`` (markdown comparison table). With no tuning flags, each
command runs the reference configuration. Exit codes: 0 on success,
2 for usage or validation errors, 1 for runtime failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import gbdt as gbdt_mod
from . import models, serialize, synthgen, training
from .data import (
    DataError,
    Dataset,
    infer_format,
    labeled_subset,
    load_records,
    save_records,
    select_split,
)
from .metrics import bootstrap_significance, det_points, evaluate_scores, relative_reduction
from .mos_filter import FilterConfig, balance_report, filter_by_mos, mos_histogram


def _load(path: str) -> Dataset:
    return load_records(path, infer_format(path))


def _write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")


# gen ------------------------------------------------------------------


def cmd_gen(args) -> int:
    if args.config is not None:
        with open(args.config, "r", encoding="utf-8") as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as e:
                raise ValueError(f"{args.config}: invalid JSON config ({e.msg})") from None
        cfg = synthgen.GenConfig.from_dict(obj)
    else:
        cfg = synthgen.GenConfig()
    if args.seed is not None:
        cfg = synthgen.GenConfig.from_dict({**cfg.to_dict(), "seed": args.seed})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ds = synthgen.generate(cfg)
    counts = {}
    for split in ("train", "valid", "eval"):
        part = select_split(ds, split)
        save_records(part, out / f"{split}.jsonl", "jsonl")
        counts[split] = len(part)
    _write_json(out / "manifest.json", {"config": cfg.to_dict(), "counts": counts})
    print(f"wrote {sum(counts.values())} records to {out}")
    return 0


# filter ---------------------------------------------------------------


def _parse_key(raw: str):
    if raw == "fused":
        return "fused"
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"--key must be 'fused' or a component index, got {raw!r}") from None


def cmd_filter(args) -> int:
    ds = _load(args.infile)
    cfg = FilterConfig(lo=args.lo, hi=args.hi, inclusive=not args.exclusive)
    key = _parse_key(args.key)
    before = balance_report(ds)
    kept = filter_by_mos(ds, cfg, key=key)
    after = balance_report(kept)
    save_records(kept, args.out, infer_format(args.out))

    def _fmt(r):
        ratio = "n/a" if r.ratio is None else f"{r.ratio:.3f}"
        return f"total={r.total} bonafide={r.n_bonafide} spoof={r.n_spoof} ratio={ratio}"

    print(f"before: {_fmt(before)}")
    print(f"after:  {_fmt(after)}")
    if args.report:
        _write_json(
            args.report,
            {
                "band": {"lo": cfg.lo, "hi": cfg.hi, "inclusive": cfg.inclusive},
                "key": key,
                "before": before.to_dict(),
                "after": after.to_dict(),
            },
        )
    if args.hist:
        hist = mos_histogram(ds, key=key, bin_width=args.hist_bin_width)
        with open(args.hist, "w", encoding="utf-8") as fh:
            fh.write("label,bin_start,count\n")
            for label in ("bonafide", "spoof"):
                for edge, count in zip(hist.edges[:-1], getattr(hist, label)):
                    fh.write(f"{label},{edge!r},{count}\n")
    return 0


# train ----------------------------------------------------------------

_FEATURES = {"fad": models.FEATURES_FAD, "fad+mos": models.FEATURES_FAD_MOS}


def cmd_train(args) -> int:
    train_ds = _load(args.train)
    valid_ds = _load(args.valid)
    features = _FEATURES[args.features]
    if args.model == "gbdt":
        lr = 0.1 if args.lr is None else args.lr
        cfg = gbdt_mod.GbdtConfig(
            num_leaves=args.num_leaves,
            max_bin=args.max_bin,
            max_depth=args.max_depth,
            learning_rate=lr,
            min_data_in_leaf=args.min_data_in_leaf,
            num_rounds=args.num_rounds,
            early_stopping_rounds=args.patience,
        )
        x_tr = models.feature_matrix(train_ds, features)
        x_va = models.feature_matrix(valid_ds, features)
        ens, history = gbdt_mod.train_gbdt(
            x_tr, train_ds.labels01(), x_va, valid_ds.labels01(), cfg, features=features
        )
        serialize.save_model(
            ens, args.out, meta={"seed": args.seed, "train_config": cfg.to_dict()}
        )
        if args.history:
            with open(args.history, "w", encoding="utf-8") as fh:
                fh.write("round,train_loss,valid_auc\n")
                for i, (tl, auc) in enumerate(zip(history.train_loss, history.valid_auc), 1):
                    fh.write(f"{i},{tl!r},{auc!r}\n")
        print(
            f"trained gbdt: {len(ens.trees)} trees kept (best round {history.best_round})"
        )
        return 0

    kind = {"mlp": "mlp", "gated-mlp": "gated_mlp", "mos-fuser": "mos_fuser"}[args.model]
    cfg = training.TrainConfig(
        learning_rate=0.001 if args.lr is None else args.lr,
        batch_size=args.batch_size,
        max_epochs=args.max_epochs,
        patience=args.patience,
        seed=args.seed,
        shuffle=not args.no_shuffle,
    )
    params, history = training.train_model(
        kind,
        train_ds,
        valid_ds,
        cfg,
        hidden_dim=args.hidden_dim,
        features=features,
        mos_source=args.mos_source,
        quantize_targets=args.quantize_targets,
    )
    serialize.save_model(
        params, args.out, meta={"seed": args.seed, "train_config": cfg.to_dict()}
    )
    if args.history:
        history.write_csv(args.history)
    print(
        f"trained {args.model}: best epoch {history.best_epoch} "
        f"(stopped after {history.stopped_epoch}), "
        f"valid loss {history.valid_loss[history.best_epoch - 1]:.6f}"
    )
    return 0


# eval -----------------------------------------------------------------


def cmd_eval(args) -> int:
    model, _ = serialize.load_model(args.model)
    if args.threshold:
        model = models.ThresholdedModel(
            base=model, cfg=models.ThresholdConfig(m1=args.m1, m2=args.m2)
        )
    ds = _load(args.data)
    if len(ds) == 0:
        raise DataError(f"{args.data}: dataset is empty")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    scores = models.predict_batch(model, ds)
    with open(out / "scores.csv", "w", encoding="utf-8") as fh:
        fh.write("utt_id,score\n")
        for r, s in zip(ds.records, scores):
            fh.write(f"{r.utt_id},{s!r}\n")

    labeled = labeled_subset(ds)
    report_obj: dict = {"n_records": len(ds), "n_labeled": len(labeled)}
    if len(labeled) > 0:
        lab_scores = models.predict_batch(model, labeled)
        labels = labeled.labels01()
        report = evaluate_scores(lab_scores, labels)
        report_obj["metrics"] = report.to_dict()
        if args.det:
            ts, far, frr = det_points(lab_scores, labels)
            with open(out / "det.csv", "w", encoding="utf-8") as fh:
                fh.write("threshold,far,frr\n")
                for t, fa, fr in zip(ts, far, frr):
                    fh.write(f"{t!r},{fa!r},{fr!r}\n")
        if args.compare:
            baseline, _ = serialize.load_model(args.compare)
            base_scores = models.predict_batch(baseline, labeled)
            sig = bootstrap_significance(
                lab_scores,
                base_scores,
                labels,
                n_bootstrap=args.n_bootstrap,
                seed=args.seed,
                significant_at=args.alpha,
            )
            report_obj["significance"] = sig.to_dict()
            _write_json(out / "significance.json", sig.to_dict())
        print(
            f"eer={report.eer:.6f} auc={report.auc:.6f} "
            f"(bonafide={report.n_bonafide}, spoof={report.n_spoof})"
        )
    else:
        print("no labeled records; wrote scores only")
    _write_json(out / "report.json", report_obj)
    return 0


# report ---------------------------------------------------------------


def cmd_report(args) -> int:
    rows = []
    for path in args.reports:
        with open(path, "r", encoding="utf-8") as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as e:
                raise ValueError(f"{path}: invalid report JSON ({e.msg})") from None
        metrics = obj.get("metrics")
        if not isinstance(metrics, dict) or "eer" not in metrics:
            raise ValueError(f"{path}: not an evaluation report (missing metrics.eer)")
        rows.append((Path(path).stem, float(metrics["eer"]), float(metrics.get("auc", np.nan))))

    ref_name, ref_eer, _ = rows[0]
    lines = [
        "| system | EER | AUC | EER reduction vs " + ref_name + " |",
        "| --- | --- | --- | --- |",
    ]
    summary = []
    for i, (name, eer, auc) in enumerate(rows):
        if i == 0 or ref_eer <= 0:
            red_str, red = "-", None
        else:
            red = relative_reduction(eer, ref_eer)
            red_str = f"{100.0 * red:.1f}%"
        lines.append(f"| {name} | {eer:.4f} | {auc:.4f} | {red_str} |")
        summary.append({"system": name, "eer": eer, "auc": auc, "eer_reduction": red})
    table = "\n".join(lines)
    print(table)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(table + "\n")
    if args.json:
        _write_json(args.json, {"reference": ref_name, "systems": summary})
    return 0


# parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mosfuse",
        description="MOS-guided score fusion experiments for spoofed-speech detection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic benchmark corpus")
    p.add_argument("--config", help="generator config JSON (defaults built in)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("filter", help="keep records inside a MOS band")
    p.add_argument("--in", dest="infile", required=True, help="input dataset (.jsonl/.csv)")
    p.add_argument("--out", required=True, help="filtered output dataset")
    p.add_argument("--lo", type=float, default=3.0, help="band lower bound (default 3.0)")
    p.add_argument("--hi", type=float, default=4.0, help="band upper bound (default 4.0)")
    p.add_argument("--exclusive", action="store_true", help="exclude the band endpoints")
    p.add_argument("--key", default="fused", help="'fused' or MOS component index (default fused)")
    p.add_argument("--report", help="write before/after balance report JSON here")
    p.add_argument("--hist", help="write per-label MOS histogram CSV here")
    p.add_argument("--hist-bin-width", type=float, default=0.25)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("train", help="train a fusion model")
    p.add_argument("--model", required=True, choices=("mlp", "gated-mlp", "gbdt", "mos-fuser"))
    p.add_argument("--train", required=True, help="training dataset")
    p.add_argument("--valid", required=True, help="validation dataset")
    p.add_argument("--out", required=True, help="model JSON output path")
    p.add_argument("--history", help="write per-epoch/round history CSV here")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument(
        "--features",
        choices=sorted(_FEATURES),
        default="fad+mos",
        help="input features for mlp/gbdt (default fad+mos)",
    )
    p.add_argument("--hidden-dim", type=int, default=3, help="MLP hidden units (default 3)")
    p.add_argument(
        "--mos-source",
        choices=models.MOS_SOURCE_CHOICES,
        default=models.MOS_FUSED,
        help="gate input for gated-mlp (default fused)",
    )
    p.add_argument(
        "--quantize-targets",
        action="store_true",
        help="snap mos-fuser training targets to the 0.125 grid",
    )
    p.add_argument("--lr", type=float, default=None, help="default 0.001 (sgd) / 0.1 (gbdt)")
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--max-epochs", type=int, default=1000)
    p.add_argument("--patience", type=int, default=20, help="early-stopping patience")
    p.add_argument("--no-shuffle", action="store_true")
    p.add_argument("--num-leaves", type=int, default=16)
    p.add_argument("--max-bin", type=int, default=25)
    p.add_argument("--max-depth", type=int, default=4)
    p.add_argument("--min-data-in-leaf", type=int, default=5)
    p.add_argument("--num-rounds", type=int, default=100)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a dataset and compute metrics")
    p.add_argument("--model", required=True, help="model JSON path")
    p.add_argument("--data", required=True, help="dataset to score")
    p.add_argument("--out-dir", required=True, help="directory for scores.csv/report.json")
    p.add_argument("--threshold", action="store_true", help="apply the hard MOS decision rule")
    p.add_argument("--m1", type=float, default=2.5, help="spoof threshold (default 2.5)")
    p.add_argument("--m2", type=float, default=4.0, help="bonafide threshold (default 4.0)")
    p.add_argument("--det", action="store_true", help="also write det.csv operating points")
    p.add_argument("--compare", help="baseline model JSON for a paired bootstrap test")
    p.add_argument("--n-bootstrap", type=int, default=1000)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0, help="bootstrap seed")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="tabulate evaluation reports")
    p.add_argument("reports", nargs="+", help="report.json files; first is the reference")
    p.add_argument("--out", help="write the markdown table here")
    p.add_argument("--json", help="write a machine-readable summary here")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 0 if e.code in (0, None) else 2
    try:
        return args.func(args)
    except (DataError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        print(f"runtime failure: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
