#!/usr/bin/env python3
"""Decoding speed: frames per second of the forward recurrence + decoder.

Decoding is strictly sequential along the recurrence (state t needs state
t-1), so FPS is about per-frame cost: mostly the decoder convolutions at
frame resolution. Doubling decoder widths visibly cuts FPS.
"""

import warpnvr as w
from warpnvr.config import ModelConfig, Variant

FRAMES = 60
WARMUP = 10


def bench(widths):
    config = ModelConfig(
        variant=Variant.V3,
        hidden_channels=16,
        grid_len=8,
        grid_channels=8,
        upsample_factors=(4, 2, 2),
        decoder_channels=widths,
        frame_hw=(96, 192),
        num_frames=FRAMES,
    )
    model = w.build_model(config, seed=0)
    report = w.decode_benchmark(model, FRAMES, warmup_frames=WARMUP)
    return report, w.count_parameters(model)


print(f"timing {FRAMES - WARMUP} frames of 96x192 after {WARMUP} warmup frames\n")
for widths in [(16, 8, 8, 8), (32, 16, 16, 16), (64, 32, 32, 32)]:
    report, params = bench(widths)
    print(f"decoder widths {str(widths):18s} ({params:7d} params): "
          f"{report.fps:7.1f} FPS  ({report.elapsed_s:.2f}s)")

report, _ = bench((32, 16, 16, 16))
print(f"\nreport for the middle model:\n{report.to_json()}")
