"""Overfit a model to a single video: Adam, warmup+cosine schedule, grouped recurrence."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import torch

from .config import TrainConfig
from .metrics import sequence_psnr
from .model import HiddenStatePair, VideoModel


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; message carries the offending step index."""


@dataclass
class MetricRow:
    step: int
    lr: float
    loss: float
    psnr: float


@dataclass
class TrainResult:
    model: VideoModel
    metrics: list[MetricRow]
    epoch_losses: list[float]

    @property
    def final_psnr(self) -> float:
        return self.metrics[-1].psnr if self.metrics else float("nan")


def reconstruction_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean squared error per frame, averaged over the frame axis."""
    if pred.shape != target.shape:
        raise ValueError(f"pred {tuple(pred.shape)} and target {tuple(target.shape)} shapes differ")
    return ((pred - target) ** 2).mean()


def lr_schedule(step: int, total_steps: int, cfg: TrainConfig) -> float:
    """Linear ramp 0 -> base_lr over the warmup span, then cosine decay to 0."""
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    warmup_steps = int(cfg.warmup_ratio * total_steps)
    if step < warmup_steps:
        return cfg.base_lr * step / warmup_steps
    if total_steps == warmup_steps:
        return cfg.base_lr
    progress = (step - warmup_steps) / (total_steps - warmup_steps)
    return cfg.base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


def frame_groups(num_frames: int, group_len: int) -> list[tuple[int, int]]:
    """Consecutive [begin, end) spans of at most group_len frames, in temporal order."""
    return [(b, min(b + group_len, num_frames)) for b in range(0, num_frames, group_len)]


def run_group(
    model: VideoModel,
    video: torch.Tensor,
    span: tuple[int, int],
    state: Optional[HiddenStatePair],
) -> tuple[torch.Tensor, HiddenStatePair]:
    """Forward one frame group and return (loss, detached carried state).

    Detaching the carried state is what truncates backpropagation at group
    boundaries: gradients at a step never reach an earlier group's graph.
    """
    begin, end = span
    pred, state = model.forward_sequence(begin, end, state)
    loss = reconstruction_loss(pred, video[begin:end])
    return loss, state.detached()


@torch.no_grad()
def evaluate_psnr(model: VideoModel, video: torch.Tensor) -> float:
    pred, _ = model.forward_sequence(clamp=True)
    return sequence_psnr(pred, video)


def train(model: VideoModel, video: torch.Tensor, cfg: TrainConfig) -> TrainResult:
    """Fit `model` to `video` [T, 3, H, W].

    Each epoch walks the frame groups in temporal order; the hidden state is
    carried across group boundaries with gradients severed (or reset to the
    learnable initial state when cfg.reset_state_per_group). One Adam step per
    group. Deterministic given the seed.
    """
    if video.shape[0] != model.config.num_frames:
        raise ValueError(
            f"video has {video.shape[0]} frames but the model was built for {model.config.num_frames}"
        )
    torch.manual_seed(cfg.seed)
    groups = frame_groups(model.config.num_frames, cfg.group_len)
    total_steps = cfg.epochs * len(groups)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.base_lr, betas=(0.9, 0.999), eps=1e-8)

    metrics: list[MetricRow] = []
    epoch_losses: list[float] = []
    step = 0
    for _ in range(cfg.epochs):
        state: Optional[HiddenStatePair] = None
        epoch_loss = 0.0
        for span in groups:
            if cfg.reset_state_per_group:
                state = model.initial_state()
            lr = lr_schedule(step, total_steps, cfg)
            for pg in optimizer.param_groups:
                pg["lr"] = lr
            optimizer.zero_grad(set_to_none=True)
            loss, state = run_group(model, video, span, state)
            loss_val = loss.item()
            if not math.isfinite(loss_val):
                raise TrainingDiverged(f"non-finite loss {loss_val} at step {step}")
            loss.backward()
            if cfg.grad_clip is not None:
                torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
            optimizer.step()
            step += 1
            epoch_loss += loss_val * (span[1] - span[0])
            if step % cfg.eval_every == 0 or step == total_steps:
                metrics.append(MetricRow(step, lr, loss_val, evaluate_psnr(model, video)))
        epoch_losses.append(epoch_loss / model.config.num_frames)
    return TrainResult(model, metrics, epoch_losses)


def write_metrics_csv(metrics: list[MetricRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "lr", "loss", "psnr"])
        for row in metrics:
            writer.writerow([row.step, repr(row.lr), repr(row.loss), repr(row.psnr)])


def read_metrics_csv(path: str | Path) -> list[MetricRow]:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(MetricRow(int(rec["step"]), float(rec["lr"]), float(rec["loss"]), float(rec["psnr"])))
    return rows
