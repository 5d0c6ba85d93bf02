"""Checkpoint files.

Layout (all integers little-endian)::

    bytes 0..7    magic  b"BZGCKPT\\0"
    bytes 8..11   u32    H, length of the JSON header in bytes
    bytes 12..    UTF-8  JSON header, H bytes
    then          float32 blob holding every tensor back to back

The header has ``format_version``, ``config`` (the GanConfig fields) and
``tensors``: a list of ``{"name", "shape", "offset"}`` where ``offset`` counts
float32 elements from the start of the blob.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .model import BezierGAN, GanConfig

MAGIC = b"BZGCKPT\0"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def checkpoint_bytes(model: BezierGAN, extra=None) -> bytes:
    state = model.state_dict()
    table, chunks, offset = [], [], 0
    for name in sorted(state):
        arr = np.ascontiguousarray(state[name], dtype="<f4")
        table.append({"name": name, "shape": list(arr.shape), "offset": offset})
        chunks.append(arr.tobytes())
        offset += arr.size
    header = {"format_version": FORMAT_VERSION, "config": model.cfg.to_dict(),
              "tensors": table, "extra": extra or {}}
    raw = json.dumps(header, sort_keys=True).encode("utf-8")
    return MAGIC + struct.pack("<I", len(raw)) + raw + b"".join(chunks)


def save_model(model: BezierGAN, path, extra=None) -> None:
    Path(path).write_bytes(checkpoint_bytes(model, extra))


def read_header(data: bytes):
    if data[:8] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    if len(data) < 12:
        raise CheckpointError("checkpoint truncated")
    (hlen,) = struct.unpack("<I", data[8:12])
    if len(data) < 12 + hlen:
        raise CheckpointError("checkpoint truncated in header")
    header = json.loads(data[12:12 + hlen].decode("utf-8"))
    version = header.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"checkpoint format version {version} not supported (expected {FORMAT_VERSION})")
    return header, 12 + hlen


def load_model(path) -> BezierGAN:
    data = Path(path).read_bytes()
    header, start = read_header(data)
    blob = np.frombuffer(data, dtype="<f4", offset=start)
    cfg = GanConfig(**header["config"])
    model = BezierGAN(cfg, seed=0)
    state = {}
    for entry in header["tensors"]:
        size = int(np.prod(entry["shape"], dtype=np.int64))
        lo = entry["offset"]
        if lo + size > blob.size:
            raise CheckpointError(f"checkpoint truncated in tensor {entry['name']}")
        state[entry["name"]] = blob[lo:lo + size].reshape(entry["shape"]).astype(np.float32)
    missing = set(model.state_dict()) - set(state)
    if missing:
        raise CheckpointError(f"checkpoint lacks tensors: {sorted(missing)[:5]}")
    model.load_state_dict(state)
    return model
