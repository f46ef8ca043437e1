#!/usr/bin/env python3
"""From trained model to bitstream: quantization, bpp, and a small RD curve.

The video *is* the model, so compressing the video means compressing the
parameters: per-tensor min-max quantization, bit-packed into a container with
magic bytes "CWRN". Sweeping the parameter budget gives a rate-distortion
curve, and two curves can be compared with the Bjontegaard delta rate.
"""

from pathlib import Path

import torch

import warpnvr as w

OUT = Path(__file__).resolve().parent / "out" / "04_rd"
OUT.mkdir(parents=True, exist_ok=True)

video = w.synthetic_blobs(8, 64, 64, num_blobs=2, seed=1, pan=(0.2, 0.08),
                          radius_range=(0.15, 0.3), speed_range=(0.1, 0.25))

# one model end to end: train -> quantize -> bitstream -> decode
config = w.budget_model(40_000, 0.3, video.frame_hw, video.num_frames)
model = w.build_model(config, seed=0)
w.train(model, video.frames, w.TrainConfig(epochs=300, group_len=5, eval_every=10**9, seed=0))
with torch.no_grad():
    float_pred, _ = model.forward_sequence(clamp=True)
float_psnr = w.sequence_psnr(float_pred, video.frames)

q = w.quantize_model(model, bits=8)
stream = OUT / "model.cwrn"
w.write_bitstream(q, stream)
restored = w.dequantize_model(w.read_bitstream(stream))
with torch.no_grad():
    quant_pred, _ = restored.forward_sequence(clamp=True)
quant_psnr = w.sequence_psnr(quant_pred, video.frames)

print(f"float model:      {float_psnr:.2f} dB")
print(f"8-bit quantized:  {quant_psnr:.2f} dB (drop {float_psnr - quant_psnr:.3f} dB)")
print(f"bitstream:        {stream.stat().st_size} bytes on disk, "
      f"{q.payload_bits} payload bits, {q.bpp():.4f} bpp")

# rate-distortion across four budgets (kept short; bump epochs for quality)
budgets = [26_000, 33_000, 42_000, 55_000]
curve = w.rd_sweep(video.frames, budgets, bits=8,
                   train_cfg=w.TrainConfig(epochs=150, group_len=5, eval_every=10**9, seed=0),
                   grid_ratio=0.3)
curve.write_csv(OUT / "rd.csv")
print("\nbpp vs PSNR:")
for point in curve:
    print(f"  {point.bpp:8.4f}  {point.psnr:6.2f} dB")

# BD-rate of the curve against a hypothetically-half-rate version of itself:
# the answer is -50% by construction, a handy sanity anchor
half = w.RdCurve([w.RdPoint(p.bpp / 2, p.psnr) for p in curve])
print(f"\nBD-rate(curve -> half-rate curve): {w.bd_rate(curve, half):+.2f}%  (exactly -50 expected)")
