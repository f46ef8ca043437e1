import pytest
import torch

from warpnvr.config import ModelConfig, Variant
from warpnvr.model import VideoModel, build_model


def make_config(
    variant: str = "v3",
    hidden_channels: int = 4,
    grid_len: int = 3,
    grid_channels: int = 2,
    upsample_factors: tuple[int, ...] = (2, 2),
    decoder_channels: tuple[int, ...] = (8, 8, 8),
    frame_hw: tuple[int, int] = (16, 24),
    num_frames: int = 6,
) -> ModelConfig:
    v = Variant(variant)
    if not v.has_grid:
        grid_len, grid_channels = 0, 0
    return ModelConfig(
        variant=v,
        hidden_channels=hidden_channels,
        grid_len=grid_len,
        grid_channels=grid_channels,
        upsample_factors=upsample_factors,
        decoder_channels=decoder_channels,
        frame_hw=frame_hw,
        num_frames=num_frames,
    )


@pytest.fixture
def tiny_model() -> VideoModel:
    return build_model(make_config(), seed=0)


@pytest.fixture
def rng() -> torch.Generator:
    g = torch.Generator()
    g.manual_seed(1234)
    return g
