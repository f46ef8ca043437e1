"""Differentiable video representation network.

A learnable initial state is rolled forward by a motion-compensated ConvGRU
recurrence (two coupled scales for local/global motion, linked by a soft
mask), optionally enhanced each step by a temporally interpolated residual
grid, and decoded to pixels by a stack of sub-pixel-convolution blocks.
The recurrence takes no per-frame input: the video lives in the parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from .config import ModelConfig, Variant


@dataclass
class HiddenStatePair:
    """Hidden states of the local and global recurrence, each [C_h, H_h, W_h]."""

    h_local: torch.Tensor
    h_global: torch.Tensor

    def detached(self) -> "HiddenStatePair":
        return HiddenStatePair(self.h_local.detach(), self.h_global.detach())


def warp(feature: torch.Tensor, flow: torch.Tensor) -> torch.Tensor:
    """Backward-warp `feature` [C, H, W] by `flow` [2, H, W] (pixel units).

    output[:, y, x] is the bilinear sample of `feature` at
    (y + flow[1, y, x], x + flow[0, y, x]); samples outside the grid replicate
    the border. Written out by hand (rather than grid_sample) so that zero flow
    is a bit-exact identity and integer flows reduce to exact index shifts.
    """
    if feature.dim() != 3 or flow.dim() != 3 or flow.shape[0] != 2:
        raise ValueError(f"expected feature [C,H,W] and flow [2,H,W], got {tuple(feature.shape)} / {tuple(flow.shape)}")
    if feature.shape[-2:] != flow.shape[-2:]:
        raise ValueError(f"feature {tuple(feature.shape)} and flow {tuple(flow.shape)} spatial dims differ")
    _, h, w = feature.shape
    ys = torch.arange(h, dtype=feature.dtype, device=feature.device).view(h, 1)
    xs = torch.arange(w, dtype=feature.dtype, device=feature.device).view(1, w)
    px = xs + flow[0]
    py = ys + flow[1]
    x0 = px.floor()
    y0 = py.floor()
    fx = px - x0
    fy = py - y0
    x0i = x0.long().clamp_(0, w - 1)
    y0i = y0.long().clamp_(0, h - 1)
    x1i = (x0.long() + 1).clamp_(0, w - 1)
    y1i = (y0.long() + 1).clamp_(0, h - 1)
    v00 = feature[:, y0i, x0i]
    v01 = feature[:, y0i, x1i]
    v10 = feature[:, y1i, x0i]
    v11 = feature[:, y1i, x1i]
    top = (1 - fx) * v00 + fx * v01
    bottom = (1 - fx) * v10 + fx * v11
    return (1 - fy) * top + fy * bottom


def interpolate_grid_slice(grid: torch.Tensor, t: int, num_frames: int) -> torch.Tensor:
    """Sample slice for frame `t` from `grid` [L, C, H, W] by temporal lerp.

    Endpoint-aligned mapping g = t (L-1) / (T-1), so frames 0 and T-1 hit the
    first and last slot exactly; g = 0 when L == 1 or T == 1.
    """
    length = grid.shape[0]
    if not 0 <= t < num_frames:
        raise IndexError(f"frame index {t} out of range [0, {num_frames})")
    if length < 1:
        raise ValueError("grid must have at least one temporal slot")
    if length == 1 or num_frames == 1:
        g = 0.0
    else:
        g = t * (length - 1) / (num_frames - 1)
    i0 = min(int(math.floor(g)), length - 1)
    i1 = min(i0 + 1, length - 1)
    alpha = g - i0
    if alpha == 0.0:
        return grid[i0]
    return (1.0 - alpha) * grid[i0] + alpha * grid[i1]


class ConvGRUCell(nn.Module):
    """Convolutional GRU with 3x3 kernels.

    z = sigmoid(conv([x, h])), r = sigmoid(conv([x, h])),
    cand = tanh(conv([x, r * h])), h' = (1 - z) * h + z * cand.
    The update is a convex mix of h and a tanh, so states stay in [-1, 1].
    """

    def __init__(self, input_channels: int, hidden_channels: int, kernel_size: int = 3):
        super().__init__()
        self.hidden_channels = hidden_channels
        padding = kernel_size // 2
        self.gates = nn.Conv2d(input_channels + hidden_channels, 2 * hidden_channels, kernel_size, padding=padding)
        self.candidate = nn.Conv2d(input_channels + hidden_channels, hidden_channels, kernel_size, padding=padding)

    def forward(self, x: torch.Tensor, h: torch.Tensor) -> torch.Tensor:
        if x.shape[-2:] != h.shape[-2:]:
            raise ValueError(f"input {tuple(x.shape)} and state {tuple(h.shape)} spatial dims differ")
        xh = torch.cat([x, h], dim=0).unsqueeze(0)
        z, r = torch.sigmoid(self.gates(xh)).squeeze(0).chunk(2, dim=0)
        cand_in = torch.cat([x, r * h], dim=0).unsqueeze(0)
        cand = torch.tanh(self.candidate(cand_in)).squeeze(0)
        return (1 - z) * h + z * cand


def warped_gru_step(
    cell: ConvGRUCell,
    motion_proj: nn.Conv2d,
    x: torch.Tensor,
    h_prev: torch.Tensor,
) -> torch.Tensor:
    """One motion-compensated recurrence step.

    The previous state is spatially aligned by a flow predicted from the input
    feature, then gated into the new state:
    h' = gru(x, warp(h_prev, motion_proj(x))).
    """
    flow = motion_proj(x.unsqueeze(0)).squeeze(0)
    return cell(x, warp(h_prev, flow))


def split_local_background(
    h_enh: torch.Tensor, mask_conv: nn.Conv2d
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """Partition a state into local-content and background parts via a soft mask.

    mask = sigmoid(conv(h_enh)) is single-channel and broadcasts over channels;
    the two parts sum back to h_enh elementwise.
    """
    mask = torch.sigmoid(mask_conv(h_enh.unsqueeze(0))).squeeze(0)
    return h_enh * mask, h_enh * (1 - mask), mask


class ResidualGrid(nn.Module):
    """Learnable [L, C, H, W] tensor holding irregular content, L <= T."""

    def __init__(self, length: int, channels: int, height: int, width: int):
        super().__init__()
        self.grid = nn.Parameter(torch.empty(length, channels, height, width).uniform_(-0.1, 0.1))

    def sample(self, t: int, num_frames: int) -> torch.Tensor:
        return interpolate_grid_slice(self.grid, t, num_frames)


class NervBlock(nn.Module):
    """Conv -> sub-pixel upsample by `scale` -> GELU."""

    def __init__(self, in_channels: int, out_channels: int, scale: int):
        super().__init__()
        self.scale = scale
        self.conv = nn.Conv2d(in_channels, out_channels * scale * scale, 3, padding=1)
        self.act = nn.GELU()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.act(F.pixel_shuffle(self.conv(x), self.scale))


class VideoModel(nn.Module):
    """The full representation: recurrence + residual grid + decoder.

    All learnable tensors are registered parameters, so ``state_dict`` /
    ``parameters`` walk every one of them (initial states and grid included)
    and the forward pass is a deterministic function of the parameters.
    """

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        ch = config.hidden_channels
        hh, hw = config.hidden_hw

        self.h0_global = nn.Parameter(torch.empty(ch, hh, hw).uniform_(-0.1, 0.1))
        self.global_cell = ConvGRUCell(ch, ch)
        self.motion_proj = nn.Conv2d(ch, 2, 3, padding=1)
        # zero-init so training starts from identity warping
        nn.init.zeros_(self.motion_proj.weight)
        nn.init.zeros_(self.motion_proj.bias)

        if config.variant.coupled:
            self.h0_local = nn.Parameter(torch.empty(ch, hh, hw).uniform_(-0.1, 0.1))
            self.local_cell = ConvGRUCell(ch, ch)
            self.mask_conv = nn.Conv2d(ch, 1, 3, padding=1)
        else:
            self.h0_local = None
            self.local_cell = None
            self.mask_conv = None

        if config.variant.has_grid and config.grid_len:
            self.residual_grid = ResidualGrid(config.grid_len, config.grid_channels, hh, hw)
            self.grid_inject = nn.Conv2d(config.grid_channels, ch, 3, padding=1)
        else:
            self.residual_grid = None
            self.grid_inject = None

        widths = config.decoder_channels
        self.spatial_proj = nn.Conv2d(ch, widths[0], 3, padding=1)
        self.blocks = nn.ModuleList(
            NervBlock(w_in, w_out, s)
            for w_in, w_out, s in zip(widths[:-1], widths[1:], config.upsample_factors)
        )
        self.head = nn.Conv2d(widths[-1], 3, 3, padding=1)

    @property
    def num_frames(self) -> int:
        return self.config.num_frames

    def initial_state(self) -> HiddenStatePair:
        h_local = self.h0_local if self.h0_local is not None else torch.zeros_like(self.h0_global)
        return HiddenStatePair(h_local, self.h0_global)

    def enhance_state(self, h_global: torch.Tensor, t: int) -> torch.Tensor:
        """Add the injected residual-grid slice for frame t; identity without a grid."""
        if self.residual_grid is None:
            return h_global
        r_t = self.residual_grid.sample(t, self.config.num_frames)
        return h_global + self.grid_inject(r_t.unsqueeze(0)).squeeze(0)

    def coupled_step(self, state: HiddenStatePair, t: int) -> HiddenStatePair:
        if not 0 <= t < self.config.num_frames:
            raise IndexError(f"frame index {t} out of range [0, {self.config.num_frames})")
        h_enh = self.enhance_state(state.h_global, t)
        if not self.config.variant.coupled:
            h_global = warped_gru_step(self.global_cell, self.motion_proj, h_enh, state.h_global)
            return HiddenStatePair(state.h_local, h_global)
        x_local, x_back, _ = split_local_background(h_enh, self.mask_conv)
        h_local = warped_gru_step(self.local_cell, self.motion_proj, x_local, state.h_local)
        x_global = h_local + x_back
        h_global = warped_gru_step(self.global_cell, self.motion_proj, x_global, state.h_global)
        return HiddenStatePair(h_local, h_global)

    def decode_frame(self, h_global: torch.Tensor, clamp: bool = False) -> torch.Tensor:
        """Decode one hidden state to an RGB frame [3, H, W].

        Left unclamped for the training loss; pass clamp=True for metrics.
        """
        x = self.spatial_proj(h_global.unsqueeze(0))
        for block in self.blocks:
            x = block(x)
        frame = self.head(x).squeeze(0)
        return frame.clamp(0.0, 1.0) if clamp else frame

    def forward_sequence(
        self,
        t_begin: int = 0,
        t_end: int | None = None,
        state: HiddenStatePair | None = None,
        clamp: bool = False,
    ) -> tuple[torch.Tensor, HiddenStatePair]:
        """Decode frames [t_begin, t_end) and return them with the carried state.

        Strictly causal: frame t depends only on the parameters, grid slices
        for indices <= t, and the initial state. Splitting a range across two
        calls (carrying the returned state) is bit-identical to one call.
        """
        num = self.config.num_frames
        if t_end is None:
            t_end = num
        if not 0 <= t_begin < t_end <= num:
            raise ValueError(f"invalid frame range [{t_begin}, {t_end}) for {num} frames")
        if state is None:
            if t_begin != 0:
                raise ValueError("a carried state is required when t_begin > 0")
            state = self.initial_state()
        frames = []
        for t in range(t_begin, t_end):
            state = self.coupled_step(state, t)
            frames.append(self.decode_frame(state.h_global, clamp=clamp))
        return torch.stack(frames), state

    def forward(self, t_begin: int = 0, t_end: int | None = None) -> torch.Tensor:
        return self.forward_sequence(t_begin, t_end)[0]


def count_parameters(model: nn.Module) -> int:
    """Element count over every learnable tensor (initial states and grid included)."""
    return sum(p.numel() for p in model.parameters())


def build_model(config: ModelConfig, seed: int | None = None) -> VideoModel:
    """Construct a model, optionally with a fixed initialization seed."""
    if seed is not None:
        torch.manual_seed(seed)
    return VideoModel(config)
