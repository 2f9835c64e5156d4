"""Versioned text checkpoints for trained subnetworks.

Layout: a magic first line ``GOLDCAST-CHECKPOINT 1`` followed by one JSON
document with keys ``subnetwork``, ``kind`` (``lstm_stack`` or ``mlp``),
``topology``, ``scalers`` (name -> columns/mean/std) and ``params``
(name -> shape/values). Floats are written with ``repr`` precision, so a
load-save round trip is exact and byte-stable.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .data import Scaler
from .errors import DataError
from .lstm import LstmCell, LstmStack
from .nn import DenseLayer, Mlp

MAGIC = "GOLDCAST-CHECKPOINT"
VERSION = 1


def _mlp_topology(mlp: Mlp) -> list[dict]:
    return [{"n_in": l.n_in, "n_out": l.n_out, "activation": l.activation, "alpha": l.alpha} for l in mlp.layers]


def _topology(model) -> tuple[str, dict]:
    if isinstance(model, LstmStack):
        return "lstm_stack", {
            "n_features": model.n_features,
            "hidden_sizes": model.hidden_sizes,
            "window_len": model.window_len,
            "head": _mlp_topology(model.head),
        }
    if isinstance(model, Mlp):
        return "mlp", {"layers": _mlp_topology(model)}
    raise TypeError(f"cannot checkpoint {type(model).__name__}")


def _blank_mlp(layers: list[dict]) -> Mlp:
    return Mlp([DenseLayer(np.zeros((d["n_out"], d["n_in"])), np.zeros(d["n_out"]), d["activation"], d["alpha"])
                for d in layers])


def _build(kind: str, topo: dict):
    if kind == "mlp":
        return _blank_mlp(topo["layers"])
    if kind == "lstm_stack":
        sizes = [topo["n_features"], *topo["hidden_sizes"]]
        cells = [LstmCell(np.zeros((4 * h, n)), np.zeros((4 * h, h)), np.zeros(4 * h)) for n, h in zip(sizes, sizes[1:])]
        return LstmStack(cells, _blank_mlp(topo["head"]), topo["window_len"])
    raise DataError(f"unknown checkpoint model kind {kind!r}")


def scaler_to_dict(s: Scaler) -> dict:
    return {"columns": list(s.columns), "mean": [float(v) for v in s.mean], "std": [float(v) for v in s.std]}


def scaler_from_dict(d: dict) -> Scaler:
    return Scaler(np.array(d["mean"], dtype=float), np.array(d["std"], dtype=float), list(d["columns"]))


def dumps(model, subnetwork: str = "", scalers: dict[str, Scaler] | None = None, extra: dict | None = None) -> str:
    kind, topo = _topology(model)
    doc = {
        "subnetwork": subnetwork,
        "kind": kind,
        "topology": topo,
        "scalers": {k: scaler_to_dict(v) for k, v in (scalers or {}).items()},
        "params": {k: {"shape": list(v.shape), "values": [float(x) for x in v.ravel()]}
                   for k, v in model.params().items()},
    }
    if extra:
        doc["extra"] = extra
    return f"{MAGIC} {VERSION}\n" + json.dumps(doc, separators=(",", ":")) + "\n"


def loads(text: str):
    """Return ``(model, scalers, doc)`` from checkpoint text."""
    header, _, body = text.partition("\n")
    parts = header.split()
    if len(parts) != 2 or parts[0] != MAGIC:
        raise DataError("not a goldcast checkpoint (bad magic header)")
    if parts[1] != str(VERSION):
        raise DataError(f"unsupported checkpoint version {parts[1]}")
    try:
        doc = json.loads(body)
    except json.JSONDecodeError as exc:
        raise DataError(f"corrupt checkpoint body: {exc}") from None
    try:
        model = _build(doc["kind"], doc["topology"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"checkpoint topology is invalid: {exc}") from None
    params = model.params()
    if set(params) != set(doc["params"]):
        raise DataError("checkpoint parameters do not match its topology")
    for name, p in params.items():
        entry = doc["params"][name]
        arr = np.array(entry["values"], dtype=float).reshape(entry["shape"])
        if arr.shape != p.shape:
            raise DataError(f"parameter {name!r} has shape {arr.shape}, topology expects {p.shape}")
        p[...] = arr
    scalers = {k: scaler_from_dict(v) for k, v in doc.get("scalers", {}).items()}
    return model, scalers, doc


def save(path, model, subnetwork: str = "", scalers: dict[str, Scaler] | None = None, extra=None) -> None:
    Path(path).write_text(dumps(model, subnetwork, scalers, extra), encoding="utf-8")


def load(path):
    path = Path(path)
    if not path.is_file():
        raise DataError(f"checkpoint not found: {path}")
    return loads(path.read_text(encoding="utf-8"))
