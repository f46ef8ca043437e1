"""Model/training configuration and the parameter-budget allocator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from enum import Enum
from typing import Optional


class BudgetInfeasibleError(ValueError):
    """Raised when no architecture fits the requested parameter budget."""


class Variant(str, Enum):
    """Ablation variants.

    V1: two-scale recurrence only, no residual grid.
    V2: single-scale recurrence with the residual grid.
    V3: two-scale (coupled) recurrence with the residual grid.
    """

    V1 = "v1"
    V2 = "v2"
    V3 = "v3"

    @property
    def has_grid(self) -> bool:
        return self is not Variant.V1

    @property
    def coupled(self) -> bool:
        return self is not Variant.V2


@dataclass(frozen=True)
class ModelConfig:
    """Complete architecture description; `budget_model` is the usual constructor.

    `decoder_channels` lists the width after the spatial projection followed by
    the output width of each upsampling block, so it has
    ``len(upsample_factors) + 1`` entries.
    """

    variant: Variant
    hidden_channels: int
    grid_len: int
    grid_channels: int
    upsample_factors: tuple[int, ...]
    decoder_channels: tuple[int, ...]
    frame_hw: tuple[int, int]
    num_frames: int
    target_params: int = 0
    grid_ratio: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        object.__setattr__(self, "upsample_factors", tuple(int(s) for s in self.upsample_factors))
        object.__setattr__(self, "decoder_channels", tuple(int(w) for w in self.decoder_channels))
        object.__setattr__(self, "frame_hw", tuple(int(d) for d in self.frame_hw))
        if len(self.decoder_channels) != len(self.upsample_factors) + 1:
            raise ValueError(
                f"decoder_channels needs {len(self.upsample_factors) + 1} entries "
                f"(spatial projection width + one per block), got {len(self.decoder_channels)}"
            )
        h, w = self.frame_hw
        factor = self.total_upsample
        if h % factor or w % factor:
            raise ValueError(
                f"frame dims {self.frame_hw} not divisible by total upsample factor {factor}"
            )
        if self.num_frames < 1:
            raise ValueError("num_frames must be >= 1")
        if self.variant is Variant.V1 and (self.grid_ratio != 0.0 or self.grid_len):
            raise ValueError("variant v1 carries no grid (grid_ratio must be 0)")
        if self.variant.has_grid and self.grid_len:
            if self.grid_len > self.num_frames:
                raise ValueError("grid_len must not exceed num_frames")
            if self.grid_channels < 1:
                raise ValueError("grid_channels must be >= 1 when a grid is present")

    @property
    def total_upsample(self) -> int:
        return math.prod(self.upsample_factors)

    @property
    def hidden_hw(self) -> tuple[int, int]:
        return self.frame_hw[0] // self.total_upsample, self.frame_hw[1] // self.total_upsample

    def to_dict(self) -> dict:
        d = asdict(self)
        d["variant"] = self.variant.value
        d["upsample_factors"] = list(self.upsample_factors)
        d["decoder_channels"] = list(self.decoder_channels)
        d["frame_hw"] = list(self.frame_hw)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(
            variant=Variant(d["variant"]),
            hidden_channels=int(d["hidden_channels"]),
            grid_len=int(d["grid_len"]),
            grid_channels=int(d["grid_channels"]),
            upsample_factors=tuple(d["upsample_factors"]),
            decoder_channels=tuple(d["decoder_channels"]),
            frame_hw=tuple(d["frame_hw"]),
            num_frames=int(d["num_frames"]),
            target_params=int(d.get("target_params", 0)),
            grid_ratio=float(d.get("grid_ratio", 0.0)),
        )


@dataclass
class TrainConfig:
    """Overfitting protocol: Adam, linear warmup + cosine decay, grouped recurrence."""

    epochs: int = 300
    base_lr: float = 2e-3
    warmup_ratio: float = 0.3
    group_len: int = 5
    seed: int = 0
    eval_every: int = 50
    grad_clip: Optional[float] = None
    reset_state_per_group: bool = False

    def __post_init__(self):
        if not 0.0 <= self.warmup_ratio < 1.0:
            raise ValueError("warmup_ratio must be in [0, 1)")
        if self.group_len < 1:
            raise ValueError("group_len must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**{k: d[k] for k in d if k in cls.__dataclass_fields__})


def _conv_params(c_in: int, c_out: int, kernel: int = 3) -> int:
    return c_in * c_out * kernel * kernel + c_out


def _gru_cell_params(c_in: int, c_hidden: int) -> int:
    # gates conv (c_in + c_h -> 2 c_h) plus candidate conv (c_in + c_h -> c_h)
    return _conv_params(c_in + c_hidden, 2 * c_hidden) + _conv_params(c_in + c_hidden, c_hidden)


def grid_param_count(config: ModelConfig) -> int:
    if not (config.variant.has_grid and config.grid_len):
        return 0
    hh, hw = config.hidden_hw
    return config.grid_len * config.grid_channels * hh * hw


def config_param_count(config: ModelConfig) -> int:
    """Closed-form learnable-element count for a config (matches the built model)."""
    ch = config.hidden_channels
    hh, hw = config.hidden_hw
    n = ch * hh * hw  # h0_global
    n += _gru_cell_params(ch, ch)  # global cell
    n += _conv_params(ch, 2)  # motion projection
    if config.variant.coupled:
        n += ch * hh * hw  # h0_local
        n += _gru_cell_params(ch, ch)  # local cell
        n += _conv_params(ch, 1)  # soft mask
    if config.variant.has_grid and config.grid_len:
        n += grid_param_count(config)
        n += _conv_params(config.grid_channels, ch)  # grid injection
    widths = config.decoder_channels
    n += _conv_params(ch, widths[0])  # spatial projection
    for w_in, w_out, s in zip(widths[:-1], widths[1:], config.upsample_factors):
        n += _conv_params(w_in, w_out * s * s)
    n += _conv_params(widths[-1], 3)  # rgb head
    return n


_MIN_HIDDEN = 4
_MIN_WIDTH = 8
_BUDGET_TOL = 0.02


def default_grid_len(num_frames: int) -> int:
    return min(num_frames, max(2, math.ceil(num_frames / 4)))


def _decoder_widths(w0: int, n_blocks: int) -> tuple[int, ...]:
    widths = [w0]
    for _ in range(n_blocks):
        widths.append(max(widths[-1] // 2, _MIN_WIDTH))
    return tuple(widths)


def budget_model(
    target_params: int,
    grid_ratio: float,
    frame_hw: tuple[int, int],
    num_frames: int,
    variant: Variant = Variant.V3,
    upsample_factors: tuple[int, ...] = (4, 2, 2),
) -> ModelConfig:
    """Allocate a parameter budget between the residual grid and the network.

    The grid gets ``grid_ratio * target_params`` elements (channel count is the
    free knob; temporal length defaults to max(2, ceil(T/4))), then the hidden
    width and first decoder width are searched so the realized total lands
    within 2% of the target. Deterministic given its inputs.

    Raises:
        BudgetInfeasibleError: naming the binding constraint when no
            architecture lands inside the tolerance window.
    """
    variant = Variant(variant)
    if not 0.0 <= grid_ratio < 1.0:
        raise ValueError("grid_ratio must be in [0, 1)")
    if variant is Variant.V1 and grid_ratio > 0.0:
        raise ValueError("variant v1 has no grid; grid_ratio must be 0")
    if grid_ratio == 0.0 and variant is Variant.V3:
        variant = Variant.V1  # a grid ratio of zero *is* the no-grid ablation
    factor = math.prod(upsample_factors)
    h, w = frame_hw
    if h % factor or w % factor:
        raise ValueError(f"frame dims {frame_hw} not divisible by total upsample factor {factor}")
    hh, hw_ = h // factor, w // factor

    use_grid = variant.has_grid and grid_ratio > 0.0
    grid_len = default_grid_len(num_frames) if use_grid else 0
    grid_channels = 0
    if use_grid:
        slice_elems = grid_len * hh * hw_
        grid_channels = max(1, round(grid_ratio * target_params / slice_elems))
        grid_elems = grid_channels * slice_elems
        if grid_elems > target_params * (grid_ratio + _BUDGET_TOL):
            raise BudgetInfeasibleError(
                f"smallest grid ({grid_elems} params at one channel) overshoots the "
                f"grid share {grid_ratio:.3f} of target {target_params}"
            )

    n_blocks = len(upsample_factors)

    def realized(ch: int, w0: int) -> int:
        cfg = ModelConfig(
            variant=variant,
            hidden_channels=ch,
            grid_len=grid_len,
            grid_channels=grid_channels,
            upsample_factors=tuple(upsample_factors),
            decoder_channels=_decoder_widths(w0, n_blocks),
            frame_hw=(h, w),
            num_frames=num_frames,
            target_params=target_params,
            grid_ratio=grid_ratio,
        )
        return config_param_count(cfg)

    floor_total = realized(_MIN_HIDDEN, _MIN_WIDTH)
    if floor_total > target_params * (1 + _BUDGET_TOL):
        raise BudgetInfeasibleError(
            f"minimum network (hidden={_MIN_HIDDEN}, width={_MIN_WIDTH}"
            f"{', one-channel grid' if use_grid else ''}) already has {floor_total} params, "
            f"above target {target_params}"
        )

    # Coarse knob: hidden channels, monotone in parameter count.
    lo, hi = _MIN_HIDDEN, _MIN_HIDDEN
    while realized(hi, max(hi, _MIN_WIDTH)) < target_params and hi < 4096:
        hi *= 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if realized(mid, max(mid, _MIN_WIDTH)) <= target_params:
            lo = mid
        else:
            hi = mid

    # Fine search around the coarse solution over (hidden, first decoder width).
    best = None
    for ch in range(max(_MIN_HIDDEN, lo - 3), lo + 4):
        w_guess = max(ch, _MIN_WIDTH)
        for w0 in range(max(_MIN_WIDTH, w_guess - 12), w_guess + 13):
            err = abs(realized(ch, w0) - target_params)
            if best is None or err < best[0]:
                best = (err, ch, w0)
    err, ch, w0 = best
    if err > target_params * _BUDGET_TOL:
        msg = (
            f"closest architecture (hidden={ch}, width={w0}) misses target "
            f"{target_params} by {err} params (> {_BUDGET_TOL:.0%} tolerance)"
        )
        if use_grid:
            msg += "; grid share leaves too little for the network"
        raise BudgetInfeasibleError(msg)
    return ModelConfig(
        variant=variant,
        hidden_channels=ch,
        grid_len=grid_len,
        grid_channels=grid_channels,
        upsample_factors=tuple(upsample_factors),
        decoder_channels=_decoder_widths(w0, n_blocks),
        frame_hw=(h, w),
        num_frames=num_frames,
        target_params=target_params,
        grid_ratio=grid_ratio,
    )
