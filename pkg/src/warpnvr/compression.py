"""Model compression: per-tensor min-max quantization, bit-packed container, RD sweeps."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .config import ModelConfig, Variant, budget_model
from .metrics import RdCurve, RdPoint, bits_per_pixel, sequence_psnr
from .model import VideoModel, build_model

MAGIC = b"CWRN"
VERSION = 1

# per-tensor (min, max) stored as 32-bit floats
_TENSOR_OVERHEAD_BITS = 64


@dataclass
class QuantizedTensor:
    name: str
    shape: tuple[int, ...]
    min: float
    max: float
    bits: int
    codes: np.ndarray  # uint32, flat; empty when constant
    constant: bool

    @property
    def numel(self) -> int:
        n = 1
        for d in self.shape:
            n *= d
        return n

    @property
    def payload_bits(self) -> int:
        return _TENSOR_OVERHEAD_BITS + (0 if self.constant else self.numel * self.bits)

    def dequantize(self) -> torch.Tensor:
        if self.constant:
            arr = np.full(self.shape, np.float32(self.min), dtype=np.float32)
            return torch.from_numpy(arr)
        step = (np.float64(self.max) - np.float64(self.min)) / (2**self.bits - 1)
        values = np.float64(self.min) + self.codes.astype(np.float64) * step
        return torch.from_numpy(values.astype(np.float32).reshape(self.shape))


@dataclass
class QuantizedModel:
    config: ModelConfig
    bits: int
    tensors: list[QuantizedTensor]

    @property
    def payload_bits(self) -> int:
        return sum(t.payload_bits for t in self.tensors)

    def bpp(self) -> float:
        return bits_per_pixel(self.payload_bits, self.config.num_frames, self.config.frame_hw)


def _quantize_array(name: str, arr: np.ndarray, bits: int) -> QuantizedTensor:
    a = arr.astype(np.float64).ravel()
    mn = np.float32(a.min())
    mx = np.float32(a.max())
    if mn == mx:
        return QuantizedTensor(name, arr.shape, float(mn), float(mx), bits, np.empty(0, np.uint32), True)
    step = (np.float64(mx) - np.float64(mn)) / (2**bits - 1)
    codes = np.rint((a - np.float64(mn)) / step)
    codes = np.clip(codes, 0, 2**bits - 1).astype(np.uint32)
    return QuantizedTensor(name, arr.shape, float(mn), float(mx), bits, codes, False)


def quantize_model(model: VideoModel, bits: int = 8) -> QuantizedModel:
    """Uniform per-tensor min-max quantization of every learnable tensor."""
    if not 2 <= bits <= 16:
        raise ValueError(f"bits must be in [2, 16], got {bits}")
    tensors = [
        _quantize_array(name, param.detach().cpu().to(torch.float32).numpy(), bits)
        for name, param in model.state_dict().items()
    ]
    return QuantizedModel(model.config, bits, tensors)


def dequantize_model(q: QuantizedModel) -> VideoModel:
    model = VideoModel(q.config)
    expected = set(model.state_dict().keys())
    got = {t.name for t in q.tensors}
    if expected != got:
        raise ValueError(f"manifest/model tensor mismatch: missing {expected - got}, extra {got - expected}")
    model.load_state_dict({t.name: t.dequantize() for t in q.tensors}, strict=True)
    return model


def _pack_codes(codes: np.ndarray, bits: int) -> bytes:
    """Bit-pack codes MSB-first within bytes; the tail byte is zero padded."""
    n = codes.size
    as_bits = np.unpackbits(codes.astype(">u4").view(np.uint8).reshape(n, 4), axis=1)[:, 32 - bits :]
    return np.packbits(as_bits.ravel()).tobytes()


def _unpack_codes(raw: bytes, n: int, bits: int) -> np.ndarray:
    flat = np.unpackbits(np.frombuffer(raw, dtype=np.uint8))[: n * bits].reshape(n, bits)
    weights = (1 << np.arange(bits - 1, -1, -1, dtype=np.int64))
    return (flat.astype(np.int64) @ weights).astype(np.uint32)


def write_bitstream(q: QuantizedModel, path: str | Path) -> None:
    entries = []
    chunks = []
    offset = 0
    for t in q.tensors:
        raw = b"" if t.constant else _pack_codes(t.codes, t.bits)
        entries.append(
            {
                "name": t.name,
                "shape": list(t.shape),
                "min": t.min,
                "max": t.max,
                "bits": t.bits,
                "constant": t.constant,
                "offset": offset,
                "nbytes": len(raw),
            }
        )
        chunks.append(raw)
        offset += len(raw)
    manifest = json.dumps({"bits": q.bits, "config": q.config.to_dict(), "tensors": entries}).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(bytes([VERSION]))
        fh.write(struct.pack("<I", len(manifest)))
        fh.write(manifest)
        for raw in chunks:
            fh.write(raw)


def read_bitstream(path: str | Path) -> QuantizedModel:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"not a bitstream file (magic {magic!r})")
        version = fh.read(1)[0]
        if version != VERSION:
            raise ValueError(f"unsupported bitstream version {version}")
        (mlen,) = struct.unpack("<I", fh.read(4))
        manifest = json.loads(fh.read(mlen).decode("utf-8"))
        blob = fh.read()
    tensors = []
    for e in manifest["tensors"]:
        raw = blob[e["offset"] : e["offset"] + e["nbytes"]]
        n = int(np.prod(e["shape"])) if e["shape"] else 1
        codes = np.empty(0, np.uint32) if e["constant"] else _unpack_codes(raw, n, e["bits"])
        tensors.append(
            QuantizedTensor(e["name"], tuple(e["shape"]), e["min"], e["max"], e["bits"], codes, e["constant"])
        )
    return QuantizedModel(ModelConfig.from_dict(manifest["config"]), manifest["bits"], tensors)


def rd_sweep(
    video: torch.Tensor,
    budgets: list[int],
    bits: int,
    train_cfg,
    grid_ratio: float = 0.2,
    variant: Variant = Variant.V3,
    seed: int = 0,
) -> RdCurve:
    """Train one model per parameter budget, quantize, and collect (bpp, psnr) points."""
    from .training import train  # local import to avoid a cycle

    if len(budgets) < 4:
        raise ValueError(f"an RD sweep needs at least 4 budgets (BD-rate needs 4 points), got {len(budgets)}")
    t, _, h, w = video.shape
    points = []
    for target in budgets:
        config = budget_model(target, grid_ratio, (h, w), t, variant)
        model = build_model(config, seed=seed)
        train(model, video, train_cfg)
        q = quantize_model(model, bits)
        restored = dequantize_model(q)
        with torch.no_grad():
            pred, _ = restored.forward_sequence(clamp=True)
        points.append(RdPoint(q.bpp(), sequence_psnr(pred, video)))
    points.sort(key=lambda p: p.bpp)
    return RdCurve(points)
