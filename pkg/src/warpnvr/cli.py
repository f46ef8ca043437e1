"""Command-line entry points: train, sweep-ratio, splice-probe, compress, decode, bench.

Every command resolves its configuration, writes an experiment manifest into
the output directory *before* producing results, and emits CSV/JSON artifacts
that are byte-reproducible given the same seed. Exit codes: 0 success,
2 usage error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import torch

from .checkpoint import load_checkpoint, save_checkpoint
from .compression import dequantize_model, quantize_model, read_bitstream, write_bitstream
from .config import BudgetInfeasibleError, TrainConfig, Variant, budget_model
from .data import DatasetSpec, FrameSequence, inserted_frame_indices, load_video, make_spliced_video, save_frames_png
from .metrics import RdPoint, decode_benchmark, psnr, sequence_psnr
from .model import build_model, count_parameters
from .training import train, write_metrics_csv

OUT_ENV_VAR = "WARPNVR_OUT"


class UsageError(ValueError):
    pass


def _resolve_out(args) -> Path:
    out = args.out or os.environ.get(OUT_ENV_VAR) or "runs"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _load_file_config(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise UsageError(f"config file {p} does not exist")
    return json.loads(p.read_text())


def _train_config(args, file_cfg: dict) -> TrainConfig:
    cfg = TrainConfig.from_dict(file_cfg.get("train", {}))
    if args.epochs is not None:
        cfg.epochs = args.epochs
    if args.group_len is not None:
        cfg.group_len = args.group_len
    cfg.seed = args.seed
    return cfg


def _load_training_video(path: str, file_cfg: dict, factors: tuple[int, ...]) -> FrameSequence:
    if not path:
        raise UsageError("missing video path")
    src = Path(path)
    if not src.exists():
        raise UsageError(f"video path {src} does not exist")
    data_cfg = file_cfg.get("data", {})
    spec = DatasetSpec(
        source=src,
        crop=data_cfg.get("crop", "none"),
        target_hw=tuple(data_cfg["target_hw"]) if "target_hw" in data_cfg else None,
        frame_range=tuple(data_cfg["frame_range"]) if "frame_range" in data_cfg else None,
        stride=data_cfg.get("stride", 1),
        size_multiple=1,
    )
    video = load_video(spec)
    h, w = video.frame_hw
    factor = 1
    for s in factors:
        factor *= s
    if h % factor or w % factor:
        raise UsageError(f"video dims {(h, w)} not divisible by decoder upsample factor {factor}")
    return video


def _write_manifest(out: Path, command: str, config: dict, seed: int, artifacts: list[str]) -> None:
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "out": str(out),
        "artifacts": artifacts,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def _model_kwargs(args, file_cfg: dict) -> dict:
    model_cfg = dict(file_cfg.get("model", {}))
    if args.target_params is not None:
        model_cfg["target_params"] = args.target_params
    if args.grid_ratio is not None:
        model_cfg["grid_ratio"] = args.grid_ratio
    if args.variant is not None:
        model_cfg["variant"] = args.variant
    model_cfg.setdefault("target_params", 300_000)
    model_cfg.setdefault("grid_ratio", 0.2)
    model_cfg.setdefault("variant", "v3")
    model_cfg.setdefault("upsample_factors", [4, 2, 2])
    return model_cfg


def cmd_train(args) -> int:
    out = _resolve_out(args)
    file_cfg = _load_file_config(args.config)
    model_kwargs = _model_kwargs(args, file_cfg)
    train_cfg = _train_config(args, file_cfg)
    video = _load_training_video(args.video, file_cfg, tuple(model_kwargs["upsample_factors"]))
    variant = Variant(model_kwargs["variant"])
    ratio = 0.0 if variant is Variant.V1 else float(model_kwargs["grid_ratio"])
    config = budget_model(
        int(model_kwargs["target_params"]),
        ratio,
        video.frame_hw,
        video.num_frames,
        variant,
        tuple(model_kwargs["upsample_factors"]),
    )
    resolved = {"train": train_cfg.to_dict(), "model": config.to_dict(), "video": str(args.video)}
    _write_manifest(out, "train", resolved, args.seed, ["metrics.csv", "model.ckpt"])

    model = build_model(config, seed=args.seed)
    result = train(model, video.frames, train_cfg)
    write_metrics_csv(result.metrics, out / "metrics.csv")
    save_checkpoint(model, out / "model.ckpt")
    print(f"trained {count_parameters(model)} params; final psnr {result.final_psnr:.2f} dB")
    print(f"artifacts in {out}")
    return 0


def _deterministic_svg(fig, path: Path) -> None:
    import matplotlib

    matplotlib.rcParams["svg.hashsalt"] = "warpnvr"
    fig.savefig(path, format="svg", metadata={"Date": None})


def cmd_sweep_ratio(args) -> int:
    out = _resolve_out(args)
    file_cfg = _load_file_config(args.config)
    model_kwargs = _model_kwargs(args, file_cfg)
    train_cfg = _train_config(args, file_cfg)
    ratios = [float(r) for r in args.ratios.split(",")]
    if len(ratios) < 3:
        raise UsageError(f"need at least 3 ratios, got {len(ratios)}")
    if len(set(ratios)) != len(ratios):
        raise UsageError("duplicate ratios are not allowed")
    video = _load_training_video(args.video, file_cfg, tuple(model_kwargs["upsample_factors"]))
    target = int(model_kwargs["target_params"])
    resolved = {"train": train_cfg.to_dict(), "target_params": target, "ratios": ratios, "video": str(args.video)}
    _write_manifest(out, "sweep-ratio", resolved, args.seed, ["ratio_psnr.csv", "ratio_psnr.svg"])

    rows = []
    for ratio in ratios:
        try:
            config = budget_model(
                target, ratio, video.frame_hw, video.num_frames,
                Variant.V3, tuple(model_kwargs["upsample_factors"]),
            )
        except BudgetInfeasibleError as exc:
            print(f"ratio {ratio}: infeasible budget ({exc}); skipping point", file=sys.stderr)
            continue
        model = build_model(config, seed=args.seed)
        result = train(model, video.frames, train_cfg)
        rows.append((ratio, result.final_psnr))
        print(f"ratio {ratio:.2f}: {result.final_psnr:.2f} dB")

    csv_path = out / "ratio_psnr.csv"
    with open(csv_path, "w") as fh:
        fh.write("ratio,psnr\n")
        for ratio, value in rows:
            fh.write(f"{ratio!r},{value!r}\n")
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot([r for r, _ in rows], [p for _, p in rows], marker="o")
    ax.set_xlabel("grid / total parameter ratio")
    ax.set_ylabel("PSNR (dB)")
    ax.set_title(f"fixed budget {target} params")
    fig.tight_layout()
    _deterministic_svg(fig, out / "ratio_psnr.svg")
    plt.close(fig)
    print(f"artifacts in {out}")
    return 0


def cmd_splice_probe(args) -> int:
    out = _resolve_out(args)
    file_cfg = _load_file_config(args.config)
    model_kwargs = _model_kwargs(args, file_cfg)
    train_cfg = _train_config(args, file_cfg)
    if args.n < 1:
        raise UsageError("n must be >= 1")
    factors = tuple(model_kwargs["upsample_factors"])
    base = _load_training_video(args.base, file_cfg, factors)
    insert = _load_training_video(args.insert, file_cfg, factors)
    spliced = make_spliced_video(base, insert, args.n, args.two_n)
    indices = inserted_frame_indices(args.n, args.two_n)
    variants = [Variant(v) for v in args.variants.split(",")]
    target = int(model_kwargs["target_params"])
    ratio = float(model_kwargs["grid_ratio"])
    resolved = {
        "train": train_cfg.to_dict(), "target_params": target, "grid_ratio": ratio,
        "n": args.n, "two_n": args.two_n, "variants": [v.value for v in variants],
        "base": str(args.base), "insert": str(args.insert),
    }
    _write_manifest(out, "splice-probe", resolved, args.seed, ["splice_psnr.csv"])

    rows = []
    for variant in variants:
        v_ratio = 0.0 if variant is Variant.V1 else ratio
        config = budget_model(target, v_ratio, spliced.frame_hw, spliced.num_frames, variant, factors)
        model = build_model(config, seed=args.seed)
        train(model, spliced.frames, train_cfg)
        with torch.no_grad():
            pred, _ = model.forward_sequence(clamp=True)
        inserted_psnr = sum(psnr(pred[i], spliced.frames[i]) for i in indices) / len(indices)
        rows.append((variant.value, inserted_psnr))
        save_frames_png(pred[indices], out / f"frames_{variant.value}", prefix="inserted")
        print(f"{variant.value}: inserted-frame psnr {inserted_psnr:.2f} dB")

    with open(out / "splice_psnr.csv", "w") as fh:
        fh.write("variant,inserted_psnr\n")
        for name, value in rows:
            fh.write(f"{name},{value!r}\n")
    save_frames_png(spliced.frames[indices], out / "frames_gt", prefix="inserted")
    print(f"artifacts in {out}")
    return 0


def cmd_compress(args) -> int:
    out = _resolve_out(args)
    ckpt = Path(args.checkpoint)
    if not ckpt.exists():
        raise UsageError(f"checkpoint {ckpt} does not exist")
    model = load_checkpoint(ckpt)
    q = quantize_model(model, args.bits)
    resolved = {"checkpoint": str(ckpt), "bits": args.bits}
    _write_manifest(out, "compress", resolved, args.seed, ["model.cwrn", "compress_report.json"])
    stream_path = out / "model.cwrn"
    write_bitstream(q, stream_path)
    report = {
        "bits": args.bits,
        "payload_bits": q.payload_bits,
        "bpp": q.bpp(),
        "params": count_parameters(model),
        "bitstream": str(stream_path),
    }
    if args.video:
        video = _load_training_video(args.video, {}, model.config.upsample_factors)
        restored = dequantize_model(q)
        with torch.no_grad():
            pred, _ = restored.forward_sequence(clamp=True)
        report["psnr"] = sequence_psnr(pred, video.frames)
        if args.rd_csv:
            rd_path = Path(args.rd_csv)
            new = not rd_path.exists()
            with open(rd_path, "a") as fh:
                if new:
                    fh.write("bpp,psnr\n")
                fh.write(f"{report['bpp']!r},{report['psnr']!r}\n")
    (out / "compress_report.json").write_text(json.dumps(report, indent=2))
    print(json.dumps(report, indent=2))
    return 0


def cmd_decode(args) -> int:
    out = _resolve_out(args)
    stream = Path(args.bitstream)
    if not stream.exists():
        raise UsageError(f"bitstream {stream} does not exist")
    q = read_bitstream(stream)
    model = dequantize_model(q)
    resolved = {"bitstream": str(stream)}
    _write_manifest(out, "decode", resolved, args.seed, ["frames/"])
    with torch.no_grad():
        pred, _ = model.forward_sequence(clamp=True)
    paths = save_frames_png(pred, out / "frames")
    print(f"decoded {len(paths)} frames into {out / 'frames'}")
    return 0


def cmd_bench(args) -> int:
    out = _resolve_out(args)
    ckpt = Path(args.checkpoint)
    if not ckpt.exists():
        raise UsageError(f"checkpoint {ckpt} does not exist")
    model = load_checkpoint(ckpt)
    num_frames = args.frames or model.config.num_frames
    resolved = {"checkpoint": str(ckpt), "frames": num_frames, "warmup": args.warmup}
    _write_manifest(out, "bench", resolved, args.seed, ["bench_report.json"])
    report = decode_benchmark(model, num_frames, args.warmup)
    (out / "bench_report.json").write_text(report.to_json())
    print(report.to_json())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="warpnvr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help=f"output directory (default ${OUT_ENV_VAR} or ./runs)")

    def model_flags(p: argparse.ArgumentParser) -> None:
        p.add_argument("--variant", choices=[v.value for v in Variant])
        p.add_argument("--target-params", type=int, dest="target_params")
        p.add_argument("--grid-ratio", type=float, dest="grid_ratio")
        p.add_argument("--group-len", type=int, dest="group_len")
        p.add_argument("--epochs", type=int)

    p = sub.add_parser("train", help="overfit a model to one video")
    common(p); model_flags(p)
    p.add_argument("--video", required=True, help="PNG frame directory or raw blob")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep-ratio", help="PSNR across grid/network ratios at fixed budget")
    common(p); model_flags(p)
    p.add_argument("--video", required=True)
    p.add_argument("--ratios", required=True, help="comma-separated grid ratios, e.g. 0.0,0.2,0.5,0.8")
    p.set_defaults(func=cmd_sweep_ratio)

    p = sub.add_parser("splice-probe", help="inserted-frame PSNR on a spliced video per variant")
    common(p); model_flags(p)
    p.add_argument("--base", required=True)
    p.add_argument("--insert", required=True)
    p.add_argument("--n", type=int, required=True, help="inserted frame count")
    p.add_argument("--two-n", type=int, dest="two_n", required=True, help="surrounding base frame count (even)")
    p.add_argument("--variants", default="v1,v3")
    p.set_defaults(func=cmd_splice_probe)

    p = sub.add_parser("compress", help="quantize a checkpoint into a bitstream")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--bits", type=int, default=8)
    p.add_argument("--video", help="if given, report dequantized PSNR against this video")
    p.add_argument("--rd-csv", dest="rd_csv", help="append a bpp,psnr row to this CSV")
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("decode", help="decode frames from a bitstream")
    common(p)
    p.add_argument("--bitstream", required=True)
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("bench", help="measure decoding speed")
    common(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--frames", type=int)
    p.add_argument("--warmup", type=int, default=8)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, BudgetInfeasibleError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - boundary: report and signal failure
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
