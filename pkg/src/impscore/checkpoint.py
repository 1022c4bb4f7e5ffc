"""Checkpoint files: JSON serialization of a ProjectionHead plus training metadata.

Layout:
    {"format_version": 1,
     "model_config": {"d", "l", "imp_metric", "prag_metric", "transform"},
     "weights": {"W_p": [[...]], "W_s": [[...]], "W_t": [[...]]}  (or W_t1/W_t2),
     "train_meta": {"best_epoch", "val_imp_acc", "val_prag_acc", "seed"}}

Weights are row-major nested lists of decimal floats.  Non-finite metadata
values (a NaN accuracy from an empty validation split) serialize as null.
"""

from __future__ import annotations

import json
import math
import os

import numpy as np

from .exceptions import ConfigError, SchemaError
from .model import ModelConfig, ProjectionHead

CHECKPOINT_FORMAT_VERSION = 1

_CONFIG_KEYS = ("d", "l", "imp_metric", "prag_metric", "transform")
_META_KEYS = ("best_epoch", "val_imp_acc", "val_prag_acc", "seed")


def _json_safe(value):
    if value is None:
        return None
    if isinstance(value, (int, np.integer)):
        return int(value)
    value = float(value)
    return value if math.isfinite(value) else None


def head_to_dict(head: ProjectionHead, train_meta: dict | None = None) -> dict:
    meta = dict(train_meta or {})
    return {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "model_config": head.config.to_dict(),
        "weights": {name: w.tolist() for name, w in head.weights().items()},
        "train_meta": {
            "best_epoch": _json_safe(meta.get("best_epoch")),
            "val_imp_acc": _json_safe(meta.get("val_imp_acc")),
            "val_prag_acc": _json_safe(meta.get("val_prag_acc")),
            "seed": _json_safe(meta.get("seed")),
        },
    }


def save_checkpoint(path, head: ProjectionHead, train_meta: dict | None = None) -> None:
    """Write a checkpoint file; output bytes are deterministic."""
    payload = head_to_dict(head, train_meta)
    text = json.dumps(payload, separators=(",", ":"), allow_nan=False)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
        fh.write("\n")


def _require(obj: dict, key: str, context: str):
    if key not in obj:
        raise SchemaError(f"checkpoint {context} is missing key {key!r}")
    return obj[key]


def load_checkpoint(path) -> tuple[ProjectionHead, dict]:
    """Load and validate a checkpoint; returns (head, train_meta)."""
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"checkpoint is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise SchemaError("checkpoint root must be a JSON object")
    version = _require(payload, "format_version", "root")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise SchemaError(f"unsupported checkpoint format_version: {version!r}")

    raw_cfg = _require(payload, "model_config", "root")
    if not isinstance(raw_cfg, dict):
        raise SchemaError("model_config must be an object")
    missing = [k for k in _CONFIG_KEYS if k not in raw_cfg]
    if missing:
        raise SchemaError(f"model_config is missing keys: {missing}")
    try:
        config = ModelConfig(**{k: raw_cfg[k] for k in _CONFIG_KEYS})
    except (ConfigError, TypeError) as exc:
        raise SchemaError(f"invalid model_config: {exc}") from exc

    raw_weights = _require(payload, "weights", "root")
    if not isinstance(raw_weights, dict):
        raise SchemaError("weights must be an object")
    if config.transform == "third_space":
        expected = {"W_p": (config.d, config.l), "W_s": (config.d, config.l),
                    "W_t1": (config.l, config.l), "W_t2": (config.l, config.l)}
    else:
        expected = {"W_p": (config.d, config.l), "W_s": (config.d, config.l),
                    "W_t": (config.l, config.l)}
    extra = sorted(set(raw_weights) - set(expected))
    if extra:
        raise SchemaError(f"unexpected weight keys for {config.transform}: {extra}")
    arrays = {}
    for name, shape in expected.items():
        value = _require(raw_weights, name, "weights")
        try:
            arr = np.asarray(value, dtype=np.float64)
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"weight {name} is not a numeric matrix: {exc}") from exc
        if arr.shape != shape:
            raise SchemaError(
                f"weight {name} has shape {arr.shape}, expected {shape}"
            )
        if not np.isfinite(arr).all():
            raise SchemaError(f"weight {name} contains non-finite entries")
        arrays[name] = arr

    meta = payload.get("train_meta", {})
    if not isinstance(meta, dict):
        raise SchemaError("train_meta must be an object")

    head = ProjectionHead(config=config, **arrays)
    return head, {k: meta.get(k) for k in _META_KEYS}
