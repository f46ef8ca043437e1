import json

import numpy as np
import pytest
import torch

from warpnvr.checkpoint import save_checkpoint
from warpnvr.cli import main
from warpnvr.data import save_frames_png, synthetic_blobs, synthetic_bloom, synthetic_texture
from warpnvr.metrics import RdCurve
from warpnvr.model import build_model

from conftest import make_config


@pytest.fixture(scope="module")
def png_video(tmp_path_factory):
    d = tmp_path_factory.mktemp("video") / "frames"
    video = synthetic_blobs(6, 64, 64, seed=2)
    save_frames_png(video.frames, d)
    return d


def train_args(png_video, out, extra=()):
    return [
        "train", "--video", str(png_video), "--out", str(out),
        "--target-params", "26000", "--epochs", "8", "--group-len", "3", "--seed", "5",
    ] + list(extra)


class TestTrainCommand:
    def test_success_writes_manifest_before_results(self, png_video, tmp_path):
        out = tmp_path / "run"
        assert main(train_args(png_video, out)) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["command"] == "train"
        assert manifest["seed"] == 5
        assert "metrics.csv" in manifest["artifacts"]
        assert (out / "metrics.csv").exists()
        assert (out / "model.ckpt").exists()
        assert manifest["config"]["train"]["epochs"] == 8

    def test_missing_video_path_exits_2(self, tmp_path, capsys):
        rc = main(["train", "--video", str(tmp_path / "nope"), "--out", str(tmp_path / "o")])
        assert rc == 2
        assert "does not exist" in capsys.readouterr().err

    def test_same_seed_reproduces_metrics_csv_bytes(self, png_video, tmp_path):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        assert main(train_args(png_video, out1)) == 0
        assert main(train_args(png_video, out2)) == 0
        assert (out1 / "metrics.csv").read_bytes() == (out2 / "metrics.csv").read_bytes()

    def test_variant_v1_disables_grid(self, png_video, tmp_path):
        out = tmp_path / "v1"
        assert main(train_args(png_video, out, ["--variant", "v1"])) == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["model"]["variant"] == "v1"
        assert manifest["config"]["model"]["grid_len"] == 0

    def test_default_protocol_constants(self):
        from warpnvr.config import TrainConfig

        cfg = TrainConfig()
        assert cfg.epochs == 300
        assert cfg.base_lr == 2e-3
        assert cfg.warmup_ratio == 0.3
        assert cfg.group_len == 5

    def test_config_file_supplies_defaults(self, png_video, tmp_path):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"train": {"epochs": 4, "eval_every": 2}}))
        out = tmp_path / "cfgrun"
        rc = main([
            "train", "--video", str(png_video), "--out", str(out),
            "--config", str(cfg_path), "--target-params", "26000", "--seed", "1",
        ])
        assert rc == 0
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["config"]["train"]["epochs"] == 4


class TestSweepRatio:
    def test_duplicate_ratios_rejected(self, png_video, tmp_path, capsys):
        rc = main([
            "sweep-ratio", "--video", str(png_video), "--out", str(tmp_path / "s"),
            "--ratios", "0.2,0.2,0.5",
        ])
        assert rc == 2
        assert "duplicate" in capsys.readouterr().err

    def test_needs_three_ratios(self, png_video, tmp_path):
        rc = main([
            "sweep-ratio", "--video", str(png_video), "--out", str(tmp_path / "s"),
            "--ratios", "0.2,0.5",
        ])
        assert rc == 2

    def test_sweep_writes_csv_and_plot(self, png_video, tmp_path, capsys):
        out = tmp_path / "sweep"
        rc = main([
            "sweep-ratio", "--video", str(png_video), "--out", str(out),
            "--ratios", "0.0,0.2,0.4", "--target-params", "33000",
            "--epochs", "3", "--group-len", "3", "--seed", "0",
        ])
        assert rc == 0
        lines = (out / "ratio_psnr.csv").read_text().splitlines()
        assert lines[0] == "ratio,psnr"
        assert len(lines) == 4
        svg = (out / "ratio_psnr.svg").read_text()
        assert svg.lstrip().startswith("<?xml")

    def test_infeasible_point_reported_and_skipped(self, png_video, tmp_path, capsys):
        out = tmp_path / "sweep2"
        rc = main([
            "sweep-ratio", "--video", str(png_video), "--out", str(out),
            "--ratios", "0.0,0.2,0.95", "--target-params", "33000",
            "--epochs", "2", "--group-len", "3",
        ])
        assert rc == 0
        assert "infeasible" in capsys.readouterr().err
        lines = (out / "ratio_psnr.csv").read_text().splitlines()
        assert len(lines) == 3  # header + two feasible points


class TestSpliceProbe:
    def test_rejects_nonpositive_n(self, tmp_path, png_video):
        rc = main([
            "splice-probe", "--base", str(png_video), "--insert", str(png_video),
            "--n", "0", "--two-n", "4", "--out", str(tmp_path / "sp"),
        ])
        assert rc == 2

    def test_probe_reports_both_variants(self, tmp_path):
        base_dir = tmp_path / "base"
        insert_dir = tmp_path / "insert"
        save_frames_png(synthetic_bloom(8, 32, 32).frames, base_dir)
        save_frames_png(synthetic_texture(2, 32, 32).frames, insert_dir)
        out = tmp_path / "probe"
        rc = main([
            "splice-probe", "--base", str(base_dir), "--insert", str(insert_dir),
            "--n", "1", "--two-n", "6", "--out", str(out),
            "--target-params", "25000", "--epochs", "3", "--group-len", "3",
        ])
        assert rc == 0
        lines = (out / "splice_psnr.csv").read_text().splitlines()
        assert lines[0] == "variant,inserted_psnr"
        assert [l.split(",")[0] for l in lines[1:]] == ["v1", "v3"]
        assert (out / "frames_v1").is_dir() and (out / "frames_v3").is_dir()


@pytest.fixture(scope="module")
def checkpoint(tmp_path_factory):
    path = tmp_path_factory.mktemp("ckpt") / "model.ckpt"
    model = build_model(make_config(num_frames=6), seed=0)
    save_checkpoint(model, path)
    return path


class TestCompressDecodeBench:
    def test_compress_then_decode_round_trip(self, checkpoint, tmp_path):
        out_c = tmp_path / "c"
        assert main(["compress", "--checkpoint", str(checkpoint), "--bits", "8", "--out", str(out_c)]) == 0
        report = json.loads((out_c / "compress_report.json").read_text())
        assert report["bits"] == 8 and report["bpp"] > 0
        out_d = tmp_path / "d"
        assert main(["decode", "--bitstream", str(out_c / "model.cwrn"), "--out", str(out_d)]) == 0
        frames = sorted((out_d / "frames").glob("*.png"))
        assert len(frames) == 6

    def test_decoded_frames_match_dequantized_model(self, checkpoint, tmp_path):
        from warpnvr.compression import dequantize_model, read_bitstream
        from warpnvr.data import DatasetSpec, load_video

        out_c = tmp_path / "c2"
        main(["compress", "--checkpoint", str(checkpoint), "--bits", "8", "--out", str(out_c)])
        out_d = tmp_path / "d2"
        main(["decode", "--bitstream", str(out_c / "model.cwrn"), "--out", str(out_d)])
        model = dequantize_model(read_bitstream(out_c / "model.cwrn"))
        with torch.no_grad():
            pred, _ = model.forward_sequence(clamp=True)
        expected = (pred.numpy() * 255).round().astype(np.uint8)
        decoded = load_video(DatasetSpec(out_d / "frames"))
        got = (decoded.frames.numpy() * 255).round().astype(np.uint8)
        np.testing.assert_array_equal(got, expected)

    def test_missing_checkpoint_exits_2(self, tmp_path):
        assert main(["compress", "--checkpoint", str(tmp_path / "no.ckpt"), "--out", str(tmp_path / "x")]) == 2

    def test_bench_report_fields(self, checkpoint, tmp_path):
        out = tmp_path / "bench"
        assert main(["bench", "--checkpoint", str(checkpoint), "--warmup", "2", "--out", str(out)]) == 0
        report = json.loads((out / "bench_report.json").read_text())
        assert report["warmup_frames"] == 2
        assert report["fps"] > 0
        assert isinstance(report["hardware"], str) and report["hardware"]

    def test_rd_csv_accumulates_and_feeds_bd_rate(self, tmp_path, png_video):
        # four budgets -> four compress calls appending to one CSV -> RdCurve
        rd_csv = tmp_path / "rd.csv"
        for i, target in enumerate((21000, 26000, 32000, 40000)):
            out_t = tmp_path / f"t{i}"
            rc = main(train_args(png_video, out_t, ["--target-params", str(target), "--epochs", "2"]))
            assert rc == 0
            rc = main([
                "compress", "--checkpoint", str(out_t / "model.ckpt"), "--bits", "8",
                "--video", str(png_video), "--rd-csv", str(rd_csv), "--out", str(out_t / "c"),
            ])
            assert rc == 0
        curve = RdCurve.read_csv(rd_csv)
        assert len(curve) == 4

    def test_out_env_var_is_used(self, checkpoint, tmp_path, monkeypatch):
        monkeypatch.setenv("WARPNVR_OUT", str(tmp_path / "envout"))
        assert main(["bench", "--checkpoint", str(checkpoint), "--warmup", "1"]) == 0
        assert (tmp_path / "envout" / "bench_report.json").exists()


def test_unknown_command_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
