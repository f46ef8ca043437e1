"""Neural video representation: warped two-scale recurrence + temporal residual grid.

A model is overfit to a single video so that the (quantized) parameters *are*
the compressed video; decoding runs the recurrence forward and upsamples each
hidden state to a frame.
"""

from .checkpoint import load_checkpoint, save_checkpoint
from .compression import (
    QuantizedModel,
    QuantizedTensor,
    dequantize_model,
    quantize_model,
    rd_sweep,
    read_bitstream,
    write_bitstream,
)
from .config import BudgetInfeasibleError, ModelConfig, TrainConfig, Variant, budget_model, config_param_count
from .data import (
    DatasetSpec,
    FrameSequence,
    load_video,
    make_spliced_video,
    save_frames_png,
    save_raw_video,
    synthetic_blobs,
    synthetic_bloom,
    synthetic_texture,
)
from .metrics import BenchmarkReport, RdCurve, RdPoint, bd_rate, bits_per_pixel, decode_benchmark, psnr, sequence_psnr
from .model import (
    ConvGRUCell,
    HiddenStatePair,
    NervBlock,
    ResidualGrid,
    VideoModel,
    build_model,
    count_parameters,
    interpolate_grid_slice,
    split_local_background,
    warp,
    warped_gru_step,
)
from .training import TrainingDiverged, TrainResult, lr_schedule, reconstruction_loss, train

__version__ = "0.1.0"

__all__ = [
    "BenchmarkReport",
    "BudgetInfeasibleError",
    "ConvGRUCell",
    "DatasetSpec",
    "FrameSequence",
    "HiddenStatePair",
    "ModelConfig",
    "NervBlock",
    "QuantizedModel",
    "QuantizedTensor",
    "RdCurve",
    "RdPoint",
    "ResidualGrid",
    "TrainConfig",
    "TrainResult",
    "TrainingDiverged",
    "Variant",
    "VideoModel",
    "bd_rate",
    "bits_per_pixel",
    "budget_model",
    "build_model",
    "config_param_count",
    "count_parameters",
    "decode_benchmark",
    "dequantize_model",
    "interpolate_grid_slice",
    "load_checkpoint",
    "load_video",
    "lr_schedule",
    "make_spliced_video",
    "psnr",
    "quantize_model",
    "rd_sweep",
    "read_bitstream",
    "reconstruction_loss",
    "save_checkpoint",
    "save_frames_png",
    "save_raw_video",
    "sequence_psnr",
    "split_local_background",
    "synthetic_blobs",
    "synthetic_bloom",
    "synthetic_texture",
    "train",
    "warp",
    "warped_gru_step",
    "write_bitstream",
]
