"""Checkpoints: a JSON manifest plus one raw little-endian blob.

The manifest lists each parameter's name, shape, dtype and byte span inside
the blob; arbitrary JSON metadata (architecture, length plan, ...) rides
along under ``"meta"``.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

__all__ = ["save_checkpoint", "load_checkpoint"]

FORMAT = "tbptt-audio-checkpoint/1"


def save_checkpoint(path, state, meta=None):
    """Write ``<path>.json`` and ``<path>.bin``; returns the manifest path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    entries = []
    offset = 0
    with open(path.with_suffix(".bin"), "wb") as blob:
        for name, value in state.items():
            arr = np.asarray(value)
            le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
            raw = np.ascontiguousarray(le).tobytes()
            blob.write(raw)
            entries.append(
                {
                    "name": name,
                    "shape": list(arr.shape),
                    "dtype": arr.dtype.name,
                    "offset": offset,
                    "nbytes": len(raw),
                }
            )
            offset += len(raw)
    manifest = {
        "format": FORMAT,
        "blob": path.with_suffix(".bin").name,
        "parameters": entries,
        "meta": meta or {},
    }
    manifest_path = path.with_suffix(".json")
    manifest_path.write_text(json.dumps(manifest, indent=2))
    return manifest_path


def load_checkpoint(path):
    """Return ``(state, meta)``; arrays are bit-identical to those saved."""
    manifest_path = Path(path).with_suffix(".json")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("format") != FORMAT:
        raise ValueError(f"{manifest_path}: unknown checkpoint format {manifest.get('format')!r}")
    raw = (manifest_path.parent / manifest["blob"]).read_bytes()
    state = {}
    for e in manifest["parameters"]:
        dtype = np.dtype(e["dtype"]).newbyteorder("<")
        chunk = raw[e["offset"] : e["offset"] + e["nbytes"]]
        arr = np.frombuffer(chunk, dtype=dtype).reshape(e["shape"])
        state[e["name"]] = arr.astype(arr.dtype.newbyteorder("="), copy=True)
    return state, manifest["meta"]
