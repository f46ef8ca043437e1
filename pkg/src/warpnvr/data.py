"""Video ingestion, cropping, splicing, and synthetic probe clips.

On-disk formats: a directory of PNG frames (ordering is the sorted,
zero-padded filename order), or a raw planar 8-bit RGB blob laid out
[T][3][H][W] with a `<file>.json` sidecar giving frames/height/width.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import torch
from PIL import Image


@dataclass
class FrameSequence:
    """A video as float frames [T, 3, H, W] in [0, 1]."""

    frames: torch.Tensor
    fps_hint: Optional[float] = None

    def __post_init__(self):
        if self.frames.dim() != 4 or self.frames.shape[1] != 3:
            raise ValueError(f"expected frames [T, 3, H, W], got {tuple(self.frames.shape)}")
        if self.frames.shape[0] < 1:
            raise ValueError("a video needs at least one frame")
        if self.frames.min() < 0 or self.frames.max() > 1:
            raise ValueError("frame values must lie in [0, 1]")

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def frame_hw(self) -> tuple[int, int]:
        return self.frames.shape[2], self.frames.shape[3]


@dataclass
class DatasetSpec:
    source: str | Path
    crop: str = "none"  # center | top-left | none
    target_hw: Optional[tuple[int, int]] = None
    frame_range: Optional[tuple[int, int]] = None
    stride: int = 1
    size_multiple: int = 1  # decoder total upsample factor the dims must divide by


def _crop(arr: np.ndarray, mode: str, target_hw: Optional[tuple[int, int]]) -> np.ndarray:
    if mode == "none" or target_hw is None:
        return arr
    h, w = arr.shape[-2:]
    th, tw = target_hw
    if th > h or tw > w:
        raise ValueError(f"crop target {target_hw} exceeds frame size {(h, w)}")
    if mode == "center":
        top, left = (h - th) // 2, (w - tw) // 2
    elif mode == "top-left":
        top, left = 0, 0
    else:
        raise ValueError(f"unknown crop mode {mode!r}")
    return arr[..., top : top + th, left : left + tw]


def _check_divisible(hw: tuple[int, int], multiple: int) -> None:
    if multiple > 1 and (hw[0] % multiple or hw[1] % multiple):
        raise ValueError(f"frame dims {hw} not divisible by required multiple {multiple}")


def _load_png_dir(spec: DatasetSpec) -> np.ndarray:
    paths = sorted(Path(spec.source).glob("*.png"))
    if not paths:
        raise ValueError(f"no PNG frames found in {spec.source}")
    if spec.frame_range is not None:
        paths = paths[spec.frame_range[0] : spec.frame_range[1]]
    paths = paths[:: spec.stride]
    frames = []
    for p in paths:
        try:
            with Image.open(p) as img:
                frames.append(np.asarray(img.convert("RGB"), dtype=np.uint8))
        except Exception as exc:
            raise ValueError(f"unreadable frame {p}: {exc}") from exc
    return np.stack(frames).transpose(0, 3, 1, 2)  # [T, 3, H, W]


def _load_raw_blob(spec: DatasetSpec) -> np.ndarray:
    path = Path(spec.source)
    sidecar = Path(str(path) + ".json")
    if not sidecar.exists():
        raise ValueError(f"raw video {path} is missing its dims sidecar {sidecar}")
    dims = json.loads(sidecar.read_text())
    t, h, w = int(dims["frames"]), int(dims["height"]), int(dims["width"])
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size != t * 3 * h * w:
        raise ValueError(f"raw video {path} has {raw.size} bytes, expected {t * 3 * h * w}")
    frames = raw.reshape(t, 3, h, w)
    if spec.frame_range is not None:
        frames = frames[spec.frame_range[0] : spec.frame_range[1]]
    return frames[:: spec.stride]


def load_video(spec: DatasetSpec) -> FrameSequence:
    """Load and normalize a video per the dataset spec; deterministic and order-stable."""
    source = Path(spec.source)
    if not source.exists():
        raise FileNotFoundError(f"video source {source} does not exist")
    arr = _load_png_dir(spec) if source.is_dir() else _load_raw_blob(spec)
    arr = _crop(arr, spec.crop, spec.target_hw)
    _check_divisible(arr.shape[-2:], spec.size_multiple)
    return FrameSequence(torch.from_numpy(arr.astype(np.float32) / 255.0))


def save_frames_png(frames: torch.Tensor, outdir: str | Path, prefix: str = "frame") -> list[Path]:
    """Write frames [T, 3, H, W] in [0,1] as 8-bit PNGs with zero-padded names."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    width = max(5, len(str(frames.shape[0] - 1)))
    paths = []
    arr = (frames.clamp(0, 1).numpy() * 255.0).round().astype(np.uint8)
    for i, frame in enumerate(arr):
        p = outdir / f"{prefix}_{i:0{width}d}.png"
        Image.fromarray(frame.transpose(1, 2, 0)).save(p)
        paths.append(p)
    return paths


def save_raw_video(frames: torch.Tensor, path: str | Path) -> None:
    """Write frames as the raw planar 8-bit blob plus its dims sidecar."""
    path = Path(path)
    arr = (frames.clamp(0, 1).numpy() * 255.0).round().astype(np.uint8)
    arr.tofile(path)
    t, _, h, w = arr.shape
    Path(str(path) + ".json").write_text(json.dumps({"frames": t, "height": h, "width": w}))


def make_spliced_video(base: FrameSequence, insert: FrameSequence, n: int, two_n: int) -> FrameSequence:
    """Insert `n` foreign frames into the middle of `two_n` base frames.

    Output = base[0 : two_n/2] ++ insert[0 : n] ++ base[two_n/2 : two_n],
    length two_n + n. This is the temporal-irregularity probe: the inserted
    frames are content the surrounding video never shows.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if two_n % 2:
        raise ValueError("two_n must be even")
    if base.num_frames < two_n:
        raise ValueError(f"base video has {base.num_frames} frames, needs {two_n}")
    if insert.num_frames < n:
        raise ValueError(f"insert video has {insert.num_frames} frames, needs {n}")
    if base.frame_hw != insert.frame_hw:
        raise ValueError(f"frame dims differ: base {base.frame_hw} vs insert {insert.frame_hw}")
    half = two_n // 2
    frames = torch.cat([base.frames[:half], insert.frames[:n], base.frames[half:two_n]])
    return FrameSequence(frames, fps_hint=base.fps_hint)


def inserted_frame_indices(n: int, two_n: int) -> list[int]:
    return list(range(two_n // 2, two_n // 2 + n))


def _color_field(h: int, w: int, phase_x: float, phase_y: float, rng_phases: np.ndarray) -> np.ndarray:
    """Smooth periodic RGB field; shifting the phases pans it without edges."""
    ys = np.linspace(0, 2 * math.pi, h, endpoint=False).reshape(h, 1)
    xs = np.linspace(0, 2 * math.pi, w, endpoint=False).reshape(1, w)
    channels = []
    for c in range(3):
        p = rng_phases[c]
        field = (
            0.5
            + 0.25 * np.sin(xs + phase_x + p[0])
            + 0.25 * np.cos(ys + phase_y + p[1]) * np.sin(2 * xs + phase_x + p[2])
        )
        channels.append(field)
    return np.stack(channels)


def synthetic_blobs(
    num_frames: int,
    height: int,
    width: int,
    num_blobs: int = 3,
    seed: int = 0,
    pan: tuple[float, float] = (0.35, 0.15),
    radius_range: tuple[float, float] = (0.08, 0.16),
    speed_range: tuple[float, float] = (0.2, 0.5),
) -> FrameSequence:
    """Cartoon-style clip: a panning smooth background plus orbiting soft blobs.

    The pan supplies regular global motion and the blobs regular local motion,
    so the content is exactly what a recurrence-with-warping is meant to learn.
    Larger radii / smaller speeds make the clip smoother and easier to fit.
    """
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0, 2 * math.pi, size=(3, 3))
    centers = rng.uniform(0.2, 0.8, size=(num_blobs, 2))
    radii = rng.uniform(*radius_range, size=num_blobs)
    orbit = rng.uniform(0.05, 0.15, size=num_blobs)
    speed = rng.uniform(*speed_range, size=num_blobs) * rng.choice([-1.0, 1.0], size=num_blobs)
    colors = rng.uniform(0.2, 1.0, size=(num_blobs, 3))
    ys = np.linspace(0, 1, height).reshape(height, 1)
    xs = np.linspace(0, 1, width).reshape(1, width)
    frames = []
    for t in range(num_frames):
        img = _color_field(height, width, pan[0] * t, pan[1] * t, phases)
        for b in range(num_blobs):
            cy = centers[b, 0] + orbit[b] * math.sin(speed[b] * t)
            cx = centers[b, 1] + orbit[b] * math.cos(speed[b] * t)
            d2 = ((ys - cy) / radii[b]) ** 2 + ((xs - cx) / radii[b]) ** 2
            bump = np.exp(-d2)
            img = img * (1 - 0.9 * bump) + colors[b].reshape(3, 1, 1) * 0.9 * bump
        frames.append(img)
    arr = np.clip(np.stack(frames), 0.0, 1.0).astype(np.float32)
    return FrameSequence(torch.from_numpy(arr))


def synthetic_bloom(num_frames: int, height: int, width: int, seed: int = 7) -> FrameSequence:
    """Slow radially expanding pattern, a stand-in for gradually blooming footage."""
    rng = np.random.default_rng(seed)
    tint = rng.uniform(0.4, 0.9, size=3)
    ys = np.linspace(-1, 1, height).reshape(height, 1)
    xs = np.linspace(-1, 1, width).reshape(1, width)
    r = np.sqrt(ys**2 + (xs * width / height) ** 2)
    frames = []
    for t in range(num_frames):
        grow = 0.25 + 0.6 * t / max(num_frames - 1, 1)
        petals = 0.5 + 0.5 * np.cos(6.0 * r / grow - 2.0)
        envelope = np.exp(-((r / grow) ** 2))
        base = 0.15 + 0.75 * petals * envelope
        frames.append(np.stack([base * tint[c] for c in range(3)]))
    arr = np.clip(np.stack(frames), 0.0, 1.0).astype(np.float32)
    return FrameSequence(torch.from_numpy(arr))


def synthetic_texture(num_frames: int, height: int, width: int, seed: int = 21) -> FrameSequence:
    """Static low-frequency random texture, visually unrelated to the other clips.

    Used as splice insert content: easy to represent spatially, but temporally
    irregular relative to the surrounding video.
    """
    rng = np.random.default_rng(seed)
    yy = np.linspace(0, 2 * math.pi, height, endpoint=False).reshape(height, 1)
    xx = np.linspace(0, 2 * math.pi, width, endpoint=False).reshape(1, width)
    img = np.zeros((3, height, width))
    for c in range(3):
        for _ in range(4):
            fy, fx = rng.integers(1, 4, size=2)
            phase = rng.uniform(0, 2 * math.pi)
            img[c] += rng.uniform(0.1, 0.3) * np.sin(fy * yy + fx * xx + phase)
    img = 0.5 + img
    arr = np.clip(np.stack([img] * num_frames), 0.0, 1.0).astype(np.float32)
    return FrameSequence(torch.from_numpy(arr))
