"""Quality, rate-distortion, and decoding-speed metrics."""

from __future__ import annotations

import csv
import json
import math
import platform
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
import torch
from scipy import interpolate


def psnr(pred: torch.Tensor, target: torch.Tensor) -> float:
    """PSNR in dB between two frames in [0, 1]; +inf when they match exactly.

    Computed in floating point on the [0, 1] scale (peak = 1).
    """
    if pred.shape != target.shape:
        raise ValueError(f"pred {tuple(pred.shape)} and target {tuple(target.shape)} shapes differ")
    mse = ((pred.double() - target.double()) ** 2).mean().item()
    if mse == 0.0:
        return float("inf")
    return 10.0 * math.log10(1.0 / mse)


def sequence_psnr(pred: torch.Tensor, target: torch.Tensor) -> float:
    """Mean of per-frame PSNRs over [T, 3, H, W] tensors."""
    if pred.shape != target.shape:
        raise ValueError(f"pred {tuple(pred.shape)} and target {tuple(target.shape)} shapes differ")
    values = [psnr(p, t) for p, t in zip(pred, target)]
    return sum(values) / len(values)


@dataclass(frozen=True)
class RdPoint:
    bpp: float
    psnr: float

    def __post_init__(self):
        if not self.bpp > 0:
            raise ValueError(f"bpp must be positive, got {self.bpp}")
        if not math.isfinite(self.psnr):
            raise ValueError(f"psnr must be finite, got {self.psnr}")


class RdCurve:
    """Ordered rate-distortion curve: >= 4 points with strictly increasing bpp."""

    def __init__(self, points: list[RdPoint]):
        if len(points) < 4:
            raise ValueError(f"an RD curve needs at least 4 points, got {len(points)}")
        for a, b in zip(points[:-1], points[1:]):
            if not a.bpp < b.bpp:
                raise ValueError("bpp values must be strictly increasing")
        self.points = list(points)

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    @property
    def bpps(self) -> np.ndarray:
        return np.array([p.bpp for p in self.points])

    @property
    def psnrs(self) -> np.ndarray:
        return np.array([p.psnr for p in self.points])

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bpp", "psnr"])
            for p in self.points:
                writer.writerow([repr(p.bpp), repr(p.psnr)])

    @classmethod
    def read_csv(cls, path: str | Path) -> "RdCurve":
        points = []
        with open(path, newline="") as fh:
            for rec in csv.DictReader(fh):
                points.append(RdPoint(float(rec["bpp"]), float(rec["psnr"])))
        return cls(points)


def bd_rate(anchor: RdCurve, test: RdCurve) -> float:
    """Bjontegaard delta rate of `test` against `anchor`, in percent.

    Piecewise-cubic-Hermite (PCHIP) interpolation of log-rate against PSNR,
    integrated over the overlapping PSNR interval. Negative means the test
    curve needs less rate than the anchor at equal quality.
    """
    lo = max(anchor.psnrs.min(), test.psnrs.min())
    hi = min(anchor.psnrs.max(), test.psnrs.max())
    if not lo < hi:
        raise ValueError(f"RD curves do not overlap in PSNR (anchor vs test: [{lo:.3f}, {hi:.3f}])")
    samples, dx = np.linspace(lo, hi, num=200, retstep=True)
    log_anchor = interpolate.pchip_interpolate(np.sort(anchor.psnrs), np.log(anchor.bpps[np.argsort(anchor.psnrs)]), samples)
    log_test = interpolate.pchip_interpolate(np.sort(test.psnrs), np.log(test.bpps[np.argsort(test.psnrs)]), samples)
    int_anchor = np.trapezoid(log_anchor, dx=dx)
    int_test = np.trapezoid(log_test, dx=dx)
    avg_log_diff = (int_test - int_anchor) / (hi - lo)
    return float((math.exp(avg_log_diff) - 1.0) * 100.0)


def bits_per_pixel(payload_bits: int, num_frames: int, frame_hw: tuple[int, int]) -> float:
    h, w = frame_hw
    return payload_bits / (num_frames * h * w)


@dataclass
class BenchmarkReport:
    fps: float
    timed_frames: int
    warmup_frames: int
    elapsed_s: float
    hardware: str

    def to_json(self) -> str:
        return json.dumps(
            {
                "fps": self.fps,
                "timed_frames": self.timed_frames,
                "warmup_frames": self.warmup_frames,
                "elapsed_s": self.elapsed_s,
                "hardware": self.hardware,
            },
            indent=2,
        )


def hardware_descriptor() -> str:
    return f"{platform.machine()} {platform.system()} python{platform.python_version()} torch-cpu"


def decode_benchmark(
    model,
    num_frames: int,
    warmup_frames: int = 8,
    clock: Callable[[], float] = time.perf_counter,
) -> BenchmarkReport:
    """Forward-only decoding speed: (num_frames - warmup_frames) / timed wall clock.

    The first `warmup_frames` are decoded outside the timed span. The clock is
    injectable so the FPS arithmetic is testable without real timing.
    """
    if num_frames <= warmup_frames:
        raise ValueError(f"num_frames ({num_frames}) must exceed warmup_frames ({warmup_frames})")
    if model.config.num_frames < num_frames:
        raise ValueError(f"model covers {model.config.num_frames} frames, asked for {num_frames}")
    with torch.no_grad():
        state = model.initial_state()
        for t in range(warmup_frames):
            state = model.coupled_step(state, t)
            model.decode_frame(state.h_global, clamp=True)
        start = clock()
        for t in range(warmup_frames, num_frames):
            state = model.coupled_step(state, t)
            model.decode_frame(state.h_global, clamp=True)
        elapsed = clock() - start
    timed = num_frames - warmup_frames
    return BenchmarkReport(
        fps=timed / elapsed,
        timed_frames=timed,
        warmup_frames=warmup_frames,
        elapsed_s=elapsed,
        hardware=hardware_descriptor(),
    )
