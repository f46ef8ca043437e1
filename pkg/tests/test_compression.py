import numpy as np
import pytest
import torch

from warpnvr.compression import (
    MAGIC,
    _quantize_array,
    dequantize_model,
    quantize_model,
    read_bitstream,
    rd_sweep,
    write_bitstream,
)
from warpnvr.config import TrainConfig
from warpnvr.metrics import sequence_psnr
from warpnvr.model import build_model, count_parameters

from conftest import make_config


class TestQuantizeTensor:
    def test_constant_tensor_round_trips_exactly(self):
        arr = np.full((3, 4), 0.7321, dtype=np.float32)
        q = _quantize_array("w", arr, 8)
        assert q.constant
        assert q.payload_bits == 64
        np.testing.assert_array_equal(q.dequantize().numpy(), arr)

    def test_unit_range_8bit_error_bound(self):
        rng = np.random.default_rng(0)
        arr = rng.uniform(-1, 1, size=1000).astype(np.float32)
        arr[0], arr[1] = -1.0, 1.0  # pin the range
        q = _quantize_array("w", arr, 8)
        err = np.abs(q.dequantize().numpy().ravel() - arr)
        assert err.max() <= (2.0 / 255) / 2 + 1e-9

    @pytest.mark.parametrize("bits", [2, 4, 8, 12, 16])
    def test_elementwise_error_within_half_step(self, bits):
        rng = np.random.default_rng(bits)
        arr = rng.normal(size=(7, 11)).astype(np.float32)
        q = _quantize_array("w", arr, bits)
        step = (q.max - q.min) / (2**bits - 1)
        err = np.abs(q.dequantize().numpy() - arr)
        assert err.max() <= step / 2 + 1e-9 * abs(q.max - q.min)

    def test_codes_stay_in_range(self):
        rng = np.random.default_rng(2)
        arr = rng.normal(size=500).astype(np.float32)
        for bits in (2, 5, 16):
            q = _quantize_array("w", arr, bits)
            assert q.codes.min() >= 0 and q.codes.max() <= 2**bits - 1
            assert q.codes.max() == 2**bits - 1  # max element uses the top code


class TestQuantizeModel:
    def test_bits_range_validated(self, tiny_model):
        with pytest.raises(ValueError):
            quantize_model(tiny_model, 1)
        with pytest.raises(ValueError):
            quantize_model(tiny_model, 17)

    def test_manifest_tensor_count_preserved(self, tiny_model):
        q = quantize_model(tiny_model, 8)
        assert {t.name for t in q.tensors} == set(tiny_model.state_dict().keys())
        restored = dequantize_model(q)
        assert len(restored.state_dict()) == len(tiny_model.state_dict())

    def test_payload_bits_formula(self, tiny_model):
        q = quantize_model(tiny_model, 6)
        expected = sum(t.numel * 6 + 64 for t in q.tensors if not t.constant)
        expected += sum(64 for t in q.tensors if t.constant)
        assert q.payload_bits == expected
        # constants: the zero-initialized motion projection, plus any
        # single-element tensor (min == max trivially), i.e. the mask bias
        constant_names = {t.name for t in q.tensors if t.constant}
        assert constant_names == {"motion_proj.weight", "motion_proj.bias", "mask_conv.bias"}

    def test_quantize_dequantize_quantize_is_stable(self, tiny_model):
        q1 = quantize_model(tiny_model, 8)
        q2 = quantize_model(dequantize_model(q1), 8)
        for a, b in zip(q1.tensors, q2.tensors):
            assert a.name == b.name
            assert a.min == b.min and a.max == b.max
            assert a.constant == b.constant
            np.testing.assert_array_equal(a.codes, b.codes)

    def test_psnr_nondecreasing_in_bit_width(self):
        torch.manual_seed(0)
        model = build_model(make_config(), seed=0)
        with torch.no_grad():
            reference, _ = model.forward_sequence(clamp=True)
        scores = []
        for bits in (4, 6, 8, 10):
            restored = dequantize_model(quantize_model(model, bits))
            with torch.no_grad():
                pred, _ = restored.forward_sequence(clamp=True)
            scores.append(sequence_psnr(pred, reference))
        assert all(a <= b + 1e-9 for a, b in zip(scores, scores[1:])), scores


class TestBitstream:
    def test_file_starts_with_magic_and_version(self, tmp_path, tiny_model):
        path = tmp_path / "m.cwrn"
        write_bitstream(quantize_model(tiny_model, 8), path)
        raw = path.read_bytes()
        assert raw[:4] == MAGIC == b"CWRN"
        assert raw[4] == 1

    @pytest.mark.parametrize("bits", [3, 8, 11])
    def test_round_trip_is_bitexact(self, tmp_path, tiny_model, bits):
        q = quantize_model(tiny_model, bits)
        path = tmp_path / "m.cwrn"
        write_bitstream(q, path)
        back = read_bitstream(path)
        assert back.bits == q.bits
        assert back.config == q.config
        for a, b in zip(q.tensors, back.tensors):
            assert a.name == b.name and a.shape == tuple(b.shape)
            assert a.min == b.min and a.max == b.max
            assert a.bits == b.bits and a.constant == b.constant
            np.testing.assert_array_equal(a.codes, b.codes)

    def test_decoded_frames_identical_after_round_trip(self, tmp_path, tiny_model):
        q = quantize_model(tiny_model, 8)
        path = tmp_path / "m.cwrn"
        write_bitstream(q, path)
        m1 = dequantize_model(q)
        m2 = dequantize_model(read_bitstream(path))
        f1, _ = m1.forward_sequence(clamp=True)
        f2, _ = m2.forward_sequence(clamp=True)
        assert torch.equal(f1, f2)

    def test_rejects_wrong_magic(self, tmp_path):
        path = tmp_path / "bad.cwrn"
        path.write_bytes(b"NOPE" + bytes(16))
        with pytest.raises(ValueError, match="magic"):
            read_bitstream(path)

    def test_packing_is_msb_first(self, tmp_path):
        from warpnvr.compression import _pack_codes, _unpack_codes

        codes = np.array([0b101, 0b010, 0b111, 0b000, 0b001], dtype=np.uint32)
        packed = _pack_codes(codes, 3)
        # 101 010 111 000 001 -> 10101011 1000001(0)
        assert packed == bytes([0b10101011, 0b10000010])
        np.testing.assert_array_equal(_unpack_codes(packed, 5, 3), codes)


def test_rd_sweep_requires_four_budgets():
    video = torch.rand(4, 3, 16, 24)
    with pytest.raises(ValueError, match="4 budgets"):
        rd_sweep(video, [100_000], 8, TrainConfig(epochs=1))


def test_bpp_matches_parameter_arithmetic(tiny_model):
    q = quantize_model(tiny_model, 8)
    cfg = tiny_model.config
    t = cfg.num_frames
    h, w = cfg.frame_hw
    n_const = sum(1 for x in q.tensors if x.constant)
    n_quant_elems = sum(x.numel for x in q.tensors if not x.constant)
    expected_bits = n_quant_elems * 8 + 64 * len(q.tensors)
    assert q.payload_bits == expected_bits
    assert q.bpp() == pytest.approx(expected_bits / (t * h * w), rel=1e-12)
    # sanity: non-constant elements = all params minus the zero-initialized
    # motion projection and the single-element mask bias
    proj = sum(p.numel() for p in tiny_model.motion_proj.parameters())
    assert n_quant_elems == count_parameters(tiny_model) - proj - 1
    assert n_const == 3
