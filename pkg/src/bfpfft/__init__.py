"""Emulated low-precision FFTs with a fixed-shift block floating point schedule.

Numeric formats are simulated on a binary64 carrier by round-to-nearest-even
quantization, so results are identical on every host.
"""

__version__ = "0.1.0"

from .formats import BF16, E4M3, E5M2, FP16, FP32, FP64, NumericFormat, lookup, quantize, quantize_complex
from .fft import (
    FP16_MUL_FP32_ACC,
    FP16_STORAGE,
    FP32_MODE,
    PURE_FP16,
    PrecisionMode,
    dft_oracle,
    fft_forward,
    get_mode,
    ifft_via_conj,
    make_plan,
    storage_only,
)
from .bfp import StageTrace, block_shift_conjugate, nan_fraction, trace_matched_filter
from .sar import SarSceneConfig, Target, rda_pipeline, simulate_scene
from .metrics import QualityReport, optimal_scale, sqnr_db

__all__ = [
    "__version__",
    "NumericFormat", "FP16", "BF16", "E4M3", "E5M2", "FP32", "FP64",
    "lookup", "quantize", "quantize_complex",
    "PrecisionMode", "FP32_MODE", "PURE_FP16", "FP16_STORAGE", "FP16_MUL_FP32_ACC",
    "get_mode", "storage_only", "make_plan", "fft_forward", "ifft_via_conj", "dft_oracle",
    "StageTrace", "block_shift_conjugate", "nan_fraction", "trace_matched_filter",
    "SarSceneConfig", "Target", "simulate_scene", "rda_pipeline",
    "QualityReport", "optimal_scale", "sqnr_db",
]
