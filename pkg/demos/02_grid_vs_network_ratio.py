#!/usr/bin/env python3
"""How should a fixed parameter budget be split between grid and network?

Sweeps the grid/total ratio at constant total size on a cartoon clip. The
usual outcome: a small grid share helps (it catches what the network won't),
but starving the network for a huge grid costs far more than it returns,
because the network is what stores the regular, repeated content.
"""

from pathlib import Path

import warpnvr as w

OUT = Path(__file__).resolve().parent / "out" / "02_ratio"
OUT.mkdir(parents=True, exist_ok=True)

video = w.synthetic_blobs(16, 64, 128, num_blobs=3, seed=21)
TARGET = 100_000
RATIOS = [0.0, 0.2, 0.5, 0.8]

rows = []
for ratio in RATIOS:
    config = w.budget_model(TARGET, ratio, video.frame_hw, video.num_frames)
    model = w.build_model(config, seed=0)
    result = w.train(model, video.frames, w.TrainConfig(epochs=60, group_len=5, eval_every=10**9, seed=0))
    rows.append((ratio, result.final_psnr))
    grid_part = "no grid" if config.grid_len == 0 else f"grid {config.grid_len}x{config.grid_channels}ch"
    print(f"ratio {ratio:.1f}: {w.count_parameters(model):7d} params ({grid_part}) "
          f"-> {result.final_psnr:.2f} dB")

with open(OUT / "ratio_psnr.csv", "w") as fh:
    fh.write("ratio,psnr\n")
    for ratio, value in rows:
        fh.write(f"{ratio!r},{value!r}\n")

best = max(rows, key=lambda r: r[1])
print(f"\nbest ratio at this budget: {best[0]:.1f} ({best[1]:.2f} dB)")
print(f"CSV written to {OUT / 'ratio_psnr.csv'}")
print("the same sweep is available as: warpnvr sweep-ratio --video ... --ratios 0.0,0.2,0.5,0.8")
