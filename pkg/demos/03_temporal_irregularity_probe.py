#!/usr/bin/env python3
"""Why the residual grid exists: temporally irregular content.

Splice one foreign frame into the middle of a slowly evolving clip and fit
two models of equal size: one without a grid (recurrence only) and one with
the residual grid. The recurrence alone reconstructs the inserted frame as a
blend of its temporal neighbors; the grid gives that one frame somewhere to
live, so the with-grid model reconstructs it far better.
"""

from pathlib import Path

import torch

import warpnvr as w

OUT = Path(__file__).resolve().parent / "out" / "03_splice"
OUT.mkdir(parents=True, exist_ok=True)

base = w.synthetic_bloom(20, 64, 64)        # slow radial "blooming" clip
insert = w.synthetic_texture(1, 64, 64)     # one visually unrelated frame
spliced = w.make_spliced_video(base, insert, n=1, two_n=20)
inserted_at = 10
print(f"spliced video: {spliced.num_frames} frames, foreign frame at t={inserted_at}")

TARGET = 40_000
for variant, ratio in [("v1", 0.0), ("v3", 0.3)]:
    config = w.budget_model(TARGET, ratio, spliced.frame_hw, spliced.num_frames, w.Variant(variant))
    model = w.build_model(config, seed=0)
    result = w.train(model, spliced.frames, w.TrainConfig(epochs=400, group_len=5, eval_every=10**9, seed=0))
    with torch.no_grad():
        pred, _ = model.forward_sequence(clamp=True)
    inserted_psnr = w.psnr(pred[inserted_at], spliced.frames[inserted_at])
    label = "no grid" if variant == "v1" else "with grid"
    print(f"{variant} ({label}): whole video {result.final_psnr:.2f} dB, "
          f"inserted frame {inserted_psnr:.2f} dB")
    w.save_frames_png(pred[inserted_at : inserted_at + 1], OUT / variant, prefix="inserted")

w.save_frames_png(spliced.frames[inserted_at : inserted_at + 1], OUT / "gt", prefix="inserted")
print(f"inserted-frame reconstructions written under {OUT} (compare v1/ vs v3/ vs gt/)")
print("same probe via the CLI: warpnvr splice-probe --base ... --insert ... --n 1 --two-n 20")
