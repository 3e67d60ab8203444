"""Versioned binary container for model weights and array bundles.

Layout: magic "TCNV" | u32 LE version (=1) | u64 LE header length |
UTF-8 JSON header | raw little-endian float32 blobs in manifest order.
The header carries the topology, tuning metadata, and an array manifest
of (name, shape, byte offset) entries; offsets are relative to the start
of the blob section.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .layers import Model, ModelConfig, build_backbone
from .tensor import Tensor

MAGIC = b"TCNV"
VERSION = 1


class CheckpointError(ValueError):
    """Structural problem in a checkpoint file (magic, version, truncation,
    or manifest/payload disagreement)."""


class Checkpoint:
    """Decoded container: JSON metadata plus named float32 arrays."""

    def __init__(self, meta: dict, arrays: dict):
        self.meta = meta
        self.arrays = arrays

    def save(self, path):
        manifest = []
        offset = 0
        blobs = []
        for name, arr in self.arrays.items():
            arr32 = np.ascontiguousarray(arr, dtype="<f4")
            manifest.append({"name": name, "shape": list(arr.shape),
                             "offset": offset})
            blobs.append(arr32.tobytes())
            offset += arr32.nbytes
        header = dict(self.meta)
        header["arrays"] = manifest
        header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
        with open(path, "wb") as f:
            f.write(MAGIC)
            f.write(struct.pack("<I", VERSION))
            f.write(struct.pack("<Q", len(header_bytes)))
            f.write(header_bytes)
            for blob in blobs:
                f.write(blob)

    @classmethod
    def load(cls, path) -> "Checkpoint":
        raw = Path(path).read_bytes()
        if len(raw) < 16:
            raise CheckpointError(f"{path}: file too short for header")
        if raw[:4] != MAGIC:
            raise CheckpointError(f"{path}: bad magic {raw[:4]!r}")
        (version,) = struct.unpack("<I", raw[4:8])
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported version {version}")
        (hlen,) = struct.unpack("<Q", raw[8:16])
        if len(raw) < 16 + hlen:
            raise CheckpointError(f"{path}: truncated header")
        try:
            header = json.loads(raw[16:16 + hlen].decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"{path}: unreadable header: {exc}") from exc
        body = raw[16 + hlen:]
        arrays = {}
        for entry in header.pop("arrays", []):
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            start = entry["offset"]
            end = start + 4 * count
            if end > len(body):
                raise CheckpointError(
                    f"{path}: array {entry['name']!r} extends past end of file")
            arrays[entry["name"]] = np.frombuffer(
                body[start:end], dtype="<f4").reshape(shape).copy()
        return cls(header, arrays)


def checkpoint_from_model(model: Model, spec_ids, lambdas, seed: int,
                          iteration: int) -> Checkpoint:
    arrays = {name: t.data.astype(np.float32) for name, t in model.named_params()}
    meta = {
        "kind": "model",
        "topology": model.config.to_dict(),
        "p": model.config.p,
        "objective_ids": list(spec_ids),
        "lambda": [float(v) for v in lambdas],
        "seed": int(seed),
        "iteration": int(iteration),
    }
    return Checkpoint(meta, arrays)


def model_from_checkpoint(ckpt: Checkpoint) -> Model:
    if ckpt.meta.get("kind") != "model":
        raise CheckpointError(f"container kind {ckpt.meta.get('kind')!r} is not a model")
    config = ModelConfig.from_dict(ckpt.meta["topology"])
    model = build_backbone(config, seed=0)
    for name, t in model.named_params():
        if name not in ckpt.arrays:
            raise CheckpointError(f"checkpoint is missing array {name!r}")
        arr = ckpt.arrays[name]
        if tuple(arr.shape) != t.shape:
            raise CheckpointError(
                f"array {name!r} has shape {arr.shape}, topology expects {t.shape}")
        t.data = arr.astype(np.float32)
    model.objective_ids = list(ckpt.meta.get("objective_ids", []))
    model.lambdas = list(ckpt.meta.get("lambda", []))
    return model


def save_checkpoint(model: Model, path, spec_ids=("rec",), lambdas=(1.0,),
                    seed: int = 0, iteration: int = 0):
    checkpoint_from_model(model, spec_ids, lambdas, seed, iteration).save(path)


def load_checkpoint(path) -> Model:
    return model_from_checkpoint(Checkpoint.load(path))


def interpolate_checkpoints(a: Checkpoint, b: Checkpoint, t: float) -> Checkpoint:
    """Weight-space interpolation: every array becomes (1-t)*a + t*b."""
    if not (0.0 <= t <= 1.0):
        raise ValueError(f"t must be in [0,1], got {t}")
    if a.meta.get("topology") != b.meta.get("topology"):
        raise CheckpointError("cannot interpolate checkpoints with different topologies")
    if set(a.arrays) != set(b.arrays):
        raise CheckpointError("cannot interpolate checkpoints with different array sets")
    if t == 0.0:
        return Checkpoint(dict(a.meta), {k: v.copy() for k, v in a.arrays.items()})
    if t == 1.0:
        return Checkpoint(dict(b.meta), {k: v.copy() for k, v in b.arrays.items()})
    arrays = {}
    for name, arr_a in a.arrays.items():
        arr_b = b.arrays[name]
        if arr_a.shape != arr_b.shape:
            raise CheckpointError(f"array {name!r} shapes differ: "
                                  f"{arr_a.shape} vs {arr_b.shape}")
        arrays[name] = ((1.0 - t) * arr_a.astype(np.float64)
                        + t * arr_b.astype(np.float64)).astype(np.float32)
    meta = dict(a.meta)
    meta["interpolated_t"] = t
    return Checkpoint(meta, arrays)
