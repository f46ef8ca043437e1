"""Checkpoint format: JSON manifest + raw little-endian float32 tensor blob.

Layout: 8-byte little-endian manifest length, UTF-8 JSON manifest, blob.
The manifest lists every tensor's name, shape, element type and byte offset
(into the blob) and embeds the model config, so a checkpoint alone rebuilds
the model bit-exactly.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
import torch

from .config import ModelConfig
from .model import VideoModel


def save_checkpoint(model: VideoModel, path: str | Path) -> None:
    tensors = []
    blobs = []
    offset = 0
    for name, param in model.state_dict().items():
        arr = param.detach().cpu().to(torch.float32).numpy()
        raw = arr.astype("<f4").tobytes()
        tensors.append(
            {
                "name": name,
                "shape": list(arr.shape),
                "dtype": "float32",
                "offset": offset,
                "nbytes": len(raw),
            }
        )
        blobs.append(raw)
        offset += len(raw)
    manifest = json.dumps(
        {"format": "warpnvr-checkpoint", "version": 1, "config": model.config.to_dict(), "tensors": tensors}
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", len(manifest)))
        fh.write(manifest)
        for raw in blobs:
            fh.write(raw)


def read_manifest(path: str | Path) -> dict:
    with open(path, "rb") as fh:
        (mlen,) = struct.unpack("<Q", fh.read(8))
        return json.loads(fh.read(mlen).decode("utf-8"))


def load_checkpoint(path: str | Path) -> VideoModel:
    with open(path, "rb") as fh:
        (mlen,) = struct.unpack("<Q", fh.read(8))
        manifest = json.loads(fh.read(mlen).decode("utf-8"))
        blob = fh.read()
    config = ModelConfig.from_dict(manifest["config"])
    model = VideoModel(config)
    state = {}
    for entry in manifest["tensors"]:
        raw = blob[entry["offset"] : entry["offset"] + entry["nbytes"]]
        arr = np.frombuffer(raw, dtype="<f4").reshape(entry["shape"]).copy()
        state[entry["name"]] = torch.from_numpy(arr)
    missing = model.load_state_dict(state, strict=True)
    assert not missing.missing_keys and not missing.unexpected_keys
    return model
