"""Bit-exact JSON checkpoints for named parameters.

The JSON writer emits floats via Python repr (shortest exact round trip),
so save -> load -> save reproduces the file byte for byte, and two runs
with identical parameter values produce identical checkpoints.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


def save_checkpoint(path, named_params, config: dict) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "config": config,
        "params": {
            name: {"shape": list(p.data.shape), "values": p.data.reshape(-1).tolist()}
            for name, p in named_params
        },
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")


def load_checkpoint(path):
    """Returns (config dict, {name: ndarray})."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version in {path}")
    params = {
        name: np.asarray(entry["values"], dtype=np.float64).reshape(entry["shape"])
        for name, entry in doc["params"].items()
    }
    return doc["config"], params


def restore_into(module, params: dict) -> None:
    """Copy loaded arrays into a module's named parameters (strict)."""
    own = dict(module.named_parameters())
    missing = sorted(set(own) - set(params))
    extra = sorted(set(params) - set(own))
    if missing or extra:
        raise ValueError(f"checkpoint mismatch: missing={missing} extra={extra}")
    for name, tensor in own.items():
        arr = params[name]
        if arr.shape != tensor.data.shape:
            raise ValueError(
                f"shape mismatch for {name}: {arr.shape} vs {tensor.data.shape}"
            )
        tensor.data = arr.copy()
