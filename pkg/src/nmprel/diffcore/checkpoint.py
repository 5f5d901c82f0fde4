"""JSON checkpoint format.

One document::

    {"format": 1, "config": {...}, "params": {name: {"rows", "cols", "data"}}}

Floats are written with ``repr`` precision so a save/load round trip is exact.
"""
from __future__ import annotations

import json
import os

import numpy as np

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    """Malformed checkpoint document."""


class CheckpointVersionError(CheckpointError):
    pass


def encode_params(params: dict) -> dict:
    out = {}
    for name in sorted(params):
        arr = np.asarray(params[name], dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"parameter {name} must be 2-d, got shape {arr.shape}")
        out[name] = {"rows": arr.shape[0], "cols": arr.shape[1], "data": arr.reshape(-1).tolist()}
    return out


def decode_params(doc: dict) -> dict[str, np.ndarray]:
    params = {}
    for name, entry in doc.items():
        try:
            rows, cols, data = int(entry["rows"]), int(entry["cols"]), entry["data"]
        except (KeyError, TypeError, ValueError) as exc:
            raise CheckpointError(f"parameter {name!r}: missing rows/cols/data") from exc
        if len(data) != rows * cols:
            raise CheckpointError(f"parameter {name!r}: {len(data)} values for shape ({rows}, {cols})")
        arr = np.array(data, dtype=np.float64).reshape(rows, cols)
        if not np.all(np.isfinite(arr)):
            raise CheckpointError(f"parameter {name!r} contains non-finite values")
        params[name] = arr
    return params


def dumps_checkpoint(params: dict, config: dict | None = None) -> str:
    doc = {"format": FORMAT_VERSION, "config": config or {}, "params": encode_params(params)}
    return json.dumps(doc, sort_keys=True)


def save_checkpoint(params: dict, path, config: dict | None = None) -> None:
    text = dumps_checkpoint(params, config)
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def loads_checkpoint(text: str) -> tuple[dict[str, np.ndarray], dict]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"checkpoint is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "format" not in doc:
        raise CheckpointError("checkpoint has no 'format' field")
    if doc["format"] != FORMAT_VERSION:
        raise CheckpointVersionError(f"unsupported checkpoint format {doc['format']!r}, expected {FORMAT_VERSION}")
    if not isinstance(doc.get("params"), dict):
        raise CheckpointError("checkpoint has no 'params' mapping")
    return decode_params(doc["params"]), doc.get("config") or {}


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, encoding="utf-8") as fh:
        return loads_checkpoint(fh.read())
