import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bfpfft.formats import (
    BF16, E4M3, E5M2, FP16, FP32, FP64, format_table, lookup, quantize, quantize_complex,
    ulp_relative_bound,
)

ml_dtypes = pytest.importorskip("ml_dtypes")

finite64 = st.floats(allow_nan=False, allow_infinity=False, width=64)


def _decode_all(dtype):
    """Every finite value of an 8-bit ml_dtypes format."""
    vals = np.arange(256, dtype=np.uint8).view(dtype).astype(np.float64)
    return np.unique(vals[np.isfinite(vals)])


@pytest.mark.parametrize("fmt,maxval", [
    (FP16, 65504.0), (BF16, 3.3895313892515355e38), (E4M3, 448.0), (E5M2, 57344.0),
])
def test_max_finite(fmt, maxval):
    assert fmt.max_finite == maxval
    assert quantize(fmt, maxval) == maxval


def test_fp16_tenth():
    assert quantize(FP16, 0.1) == 0.0999755859375


def test_fp16_overflow_and_saturation():
    assert quantize(FP16, 65520.0) == math.inf
    assert quantize(FP16, -1e6) == -math.inf
    assert quantize(FP16, 65519.0) == 65504.0
    assert quantize(FP16.saturating(), 1e9) == 65504.0


def test_e4m3_has_no_infinity():
    assert math.isnan(quantize(E4M3, 1000.0))
    assert quantize(E4M3, 460.0) == 448.0
    assert quantize(E4M3.saturating(), 1000.0) == 448.0
    assert quantize(E5M2, 1e6) == math.inf


def test_specials_pass_through():
    for fmt in format_table():
        out = quantize(fmt, np.array([np.nan, -0.0, 0.0]))
        assert np.isnan(out[0])
        assert out[1] == 0 and math.copysign(1, out[1]) == -1.0
    assert quantize(FP16, math.inf) == math.inf


def test_fp32_fp64_identity():
    x = np.random.default_rng(1).standard_normal(100)
    assert np.array_equal(quantize(FP32, x), x)
    assert np.array_equal(quantize(FP64, x), x)


def test_lookup_aliases():
    assert lookup("FP16") is FP16
    assert lookup("half") is FP16
    assert lookup("float8_e4m3fn") is E4M3
    with pytest.raises(KeyError):
        lookup("fp12")


def test_fp16_matches_numpy_float16():
    x = np.random.default_rng(2).uniform(-70000, 70000, 200_000)
    x = np.concatenate([x, np.random.default_rng(3).uniform(-1e-4, 1e-4, 50_000)])
    with np.errstate(over="ignore"):
        expect = x.astype(np.float16).astype(np.float64)
    assert np.array_equal(quantize(FP16, x), expect)


def test_bf16_matches_ml_dtypes_on_float32_inputs():
    # ml_dtypes rounds float64 -> float32 -> bf16; float32-exact inputs avoid the double rounding
    x = np.random.default_rng(4).standard_normal(100_000).astype(np.float32).astype(np.float64)
    x *= np.exp2(np.random.default_rng(5).integers(-130, 120, x.size))
    expect = x.astype(ml_dtypes.bfloat16).astype(np.float64)
    assert np.array_equal(quantize(BF16, x), expect)


@pytest.mark.parametrize("fmt,dtype", [
    (E4M3, "float8_e4m3fn"), (E5M2, "float8_e5m2"),
])
def test_fp8_code_points_are_fixed(fmt, dtype):
    vals = _decode_all(getattr(ml_dtypes, dtype))
    assert np.array_equal(quantize(fmt, vals), vals)


@pytest.mark.parametrize("fmt,dtype", [
    (E4M3, "float8_e4m3fn"), (E5M2, "float8_e5m2"),
])
def test_fp8_matches_ml_dtypes_in_range(fmt, dtype):
    x = np.random.default_rng(6).uniform(-fmt.max_finite, fmt.max_finite, 100_000)
    x = x.astype(np.float32).astype(np.float64)
    expect = x.astype(getattr(ml_dtypes, dtype)).astype(np.float64)
    assert np.array_equal(quantize(fmt, x), expect)


def test_fp8_midpoint_ties_to_even():
    # e4m3 around 1: step 1/8, so 1 + 1/16 sits halfway between 1 and 1.125
    assert quantize(E4M3, 1.0625) == 1.0
    assert quantize(E4M3, 1.1875) == 1.25
    assert quantize(E5M2, 1.125) == 1.0


def test_subnormals_kept():
    assert quantize(FP16, 2.0**-24) == 2.0**-24
    assert quantize(FP16, 2.0**-26) == 0.0
    assert quantize(E4M3, 2.0**-9) == 2.0**-9
    assert FP16.min_subnormal == 2.0**-24


def test_quantize_complex_components():
    z = np.array([0.1 + 0.1j, 1e6 - 3j, complex(np.nan, 1.0)])
    q = quantize_complex(FP16, z)
    assert q[0] == complex(0.0999755859375, 0.0999755859375)
    assert q[1].real == math.inf and q[1].imag == -3.0
    assert math.isnan(q[2].real) and q[2].imag == 1.0


@settings(max_examples=300, deadline=None)
@given(finite64)
def test_idempotent(x):
    for fmt in (FP16, BF16, E4M3, E5M2):
        q = quantize(fmt, x)
        if math.isfinite(q):
            assert quantize(fmt, q) == q


@settings(max_examples=300, deadline=None)
@given(finite64, finite64)
def test_monotone(a, b):
    a, b = min(a, b), max(a, b)
    for fmt in (FP16, BF16, E5M2, E4M3.saturating()):
        assert quantize(fmt, a) <= quantize(fmt, b)


@settings(max_examples=300, deadline=None)
@given(st.floats(min_value=6.2e-5, max_value=65000, allow_nan=False))
def test_fp16_relative_error_bound(x):
    q = quantize(FP16, x)
    assert abs(q - x) <= ulp_relative_bound(FP16) * abs(x)


@settings(max_examples=200, deadline=None)
@given(st.integers(-2048, 2048))
def test_small_integers_exact_in_fp16(k):
    assert quantize(FP16, float(k)) == k


def test_relative_bounds():
    assert ulp_relative_bound(FP16) == 2.0**-11
    assert ulp_relative_bound(E4M3) == 2.0**-4
    assert ulp_relative_bound(E5M2) == 2.0**-3
