"""Model persistence: one JSON document per model, bit-exact round-trip.

Every file carries a ``model_type`` tag, the layer dimensions, the flat
weight arrays, and an optional ``meta`` block (seed and training-config
echo). Floats are written with Python's shortest round-trip repr, so a
reloaded model reproduces its predictions bit for bit. Tree ensembles
additionally store the config echo, per-feature bin boundaries, and
per-tree node arrays in pre-order.
"""

from __future__ import annotations

import json

import numpy as np

from . import gbdt, models

FORMAT_VERSION = 1


def _arr(a: np.ndarray) -> list:
    return np.asarray(a, dtype=np.float64).reshape(-1).tolist()


def _mlp_to_dict(p: models.MlpParams) -> dict:
    return {
        "in_dim": p.in_dim,
        "hidden_dim": p.hidden_dim,
        "features": p.features,
        "w1": _arr(p.w1),
        "w2": _arr(p.w2),
        "b2": _arr(p.b2),
    }


def _mlp_from_dict(obj: dict) -> models.MlpParams:
    d, h = int(obj["in_dim"]), int(obj["hidden_dim"])
    return models.MlpParams(
        w1=np.array(obj["w1"], dtype=np.float64).reshape(h, d),
        w2=np.array(obj["w2"], dtype=np.float64).reshape(1, h),
        b2=np.array(obj["b2"], dtype=np.float64).reshape(1),
        features=obj["features"],
    )


def _model_to_dict(model) -> dict:
    if isinstance(model, models.MlpParams):
        return {"model_type": "mlp", **_mlp_to_dict(model)}
    if isinstance(model, models.GatedMlpParams):
        return {
            "model_type": "gated_mlp",
            "fad_dim": model.fad_dim,
            "mos_dim": model.mos_dim,
            "mos_source": model.mos_source,
            "wd": _arr(model.wd),
            "bd": _arr(model.bd),
            "inner": _mlp_to_dict(model.inner),
        }
    if isinstance(model, models.MosFuserParams):
        return {
            "model_type": "mos_fuser",
            "mos_dim": model.mos_dim,
            "w": _arr(model.w),
            "a": model.a,
            "b": model.b,
        }
    if isinstance(model, models.ThresholdedModel):
        return {
            "model_type": "thresholded",
            "m1": model.cfg.m1,
            "m2": model.cfg.m2,
            "base": _model_to_dict(model.base),
        }
    if isinstance(model, gbdt.TreeEnsemble):
        return {
            "model_type": "gbdt",
            "config": model.config.to_dict(),
            "features": model.features,
            "base_score": model.base_score,
            "bin_boundaries": [_arr(b) for b in model.bin_boundaries],
            "trees": [_tree_to_dict(t) for t in model.trees],
        }
    raise TypeError(f"cannot serialize model of type {type(model).__name__}")


def _tree_to_dict(tree: gbdt.Tree) -> dict:
    # emit nodes in pre-order; remap child pointers to the new positions
    order: list[int] = []

    def visit(nid: int) -> None:
        order.append(nid)
        nd = tree.nodes[nid]
        if not nd.is_leaf:
            visit(nd.left)
            visit(nd.right)

    if tree.nodes:
        visit(0)
    pos = {nid: i for i, nid in enumerate(order)}
    nodes = []
    for nid in order:
        nd = tree.nodes[nid]
        nodes.append(
            {
                "feature": nd.feature,
                "threshold": nd.threshold,
                "left": pos[nd.left] if not nd.is_leaf else -1,
                "right": pos[nd.right] if not nd.is_leaf else -1,
                "value": nd.value,
                "gain": nd.gain,
                "depth": nd.depth,
                "n_samples": nd.n_samples,
            }
        )
    return {"nodes": nodes, "split_order": [pos[nid] for nid in tree.split_order]}


def _tree_from_dict(obj: dict) -> gbdt.Tree:
    nodes = [
        gbdt.TreeNode(
            feature=int(nd["feature"]),
            threshold=int(nd["threshold"]),
            left=int(nd["left"]),
            right=int(nd["right"]),
            value=float(nd["value"]),
            gain=float(nd["gain"]),
            depth=int(nd["depth"]),
            n_samples=int(nd["n_samples"]),
        )
        for nd in obj["nodes"]
    ]
    return gbdt.Tree(nodes=nodes, split_order=[int(i) for i in obj["split_order"]])


def _model_from_dict(obj: dict):
    kind = obj.get("model_type")
    if kind == "mlp":
        return _mlp_from_dict(obj)
    if kind == "gated_mlp":
        n, m = int(obj["fad_dim"]), int(obj["mos_dim"])
        return models.GatedMlpParams(
            wd=np.array(obj["wd"], dtype=np.float64).reshape(n, m),
            bd=np.array(obj["bd"], dtype=np.float64).reshape(n),
            inner=_mlp_from_dict(obj["inner"]),
            mos_source=obj["mos_source"],
        )
    if kind == "mos_fuser":
        return models.MosFuserParams(
            w=np.array(obj["w"], dtype=np.float64).reshape(int(obj["mos_dim"])),
            a=float(obj["a"]),
            b=float(obj["b"]),
        )
    if kind == "thresholded":
        return models.ThresholdedModel(
            base=_model_from_dict(obj["base"]),
            cfg=models.ThresholdConfig(m1=float(obj["m1"]), m2=float(obj["m2"])),
        )
    if kind == "gbdt":
        ens = gbdt.TreeEnsemble(
            config=gbdt.GbdtConfig(**obj["config"]),
            base_score=float(obj["base_score"]),
            bin_boundaries=[np.array(b, dtype=np.float64) for b in obj["bin_boundaries"]],
            trees=[_tree_from_dict(t) for t in obj["trees"]],
            features=obj["features"],
        )
        return ens
    raise ValueError(f"unknown model_type {kind!r}")


def save_model(model, path, meta: dict | None = None) -> None:
    """Write a model (and optional seed/config metadata) as JSON."""
    doc = {"format_version": FORMAT_VERSION, **_model_to_dict(model)}
    if meta is not None:
        doc["meta"] = meta
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_model(path):
    """Load any serialized model; returns ``(model, meta)``."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise ValueError(f"{path}: invalid model JSON ({e.msg})") from None
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: model file must hold a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported format_version {version!r}")
    try:
        model = _model_from_dict(doc)
    except (KeyError, TypeError, ValueError) as e:
        raise ValueError(f"{path}: malformed model document: {e}") from None
    return model, doc.get("meta")
