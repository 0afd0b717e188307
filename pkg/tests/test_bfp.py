import numpy as np
import pytest

from bfpfft.bfp import StageTrace, block_shift_conjugate, nan_fraction, trace_matched_filter, trace_pulse
from bfpfft.fft import FP16_MUL_FP32_ACC, FP16_STORAGE, FP32_MODE, PURE_FP16
from bfpfft.formats import BF16, E4M3, E5M2, FP16, quantize

FP16_BOUND = 4096 * (1 + 2.0**-9)


def test_block_shift_examples():
    assert block_shift_conjugate([3 + 4j], 1)[0] == 3 - 4j
    out = block_shift_conjugate(np.array([3 + 4j, 0, 0, 0]), 4)
    assert out[0] == complex(0.75, -1.0)
    assert out[1] == 0


def test_block_shift_unit_scale_spectrum():
    z = np.full(4096, 4096.0 + 0j)
    out = block_shift_conjugate(z, 4096, FP16)
    assert np.all(out == 1.0)


def test_block_shift_length_checked():
    with pytest.raises(ValueError):
        block_shift_conjugate(np.ones(8), 4)


@pytest.mark.parametrize("fmt", [FP16, BF16, E4M3, E5M2])
@pytest.mark.parametrize("n", [2, 64, 1024, 4096])
def test_inverse_n_is_exact(fmt, n):
    assert quantize(fmt, 1.0 / n) == 1.0 / n or 1.0 / n < fmt.min_subnormal


def test_shift_adds_no_rounding_for_representable_inputs():
    # scaling by a power of two is exact while the result stays normal
    x = quantize(FP16, np.random.default_rng(0).uniform(1, 60000, (16, 64)))
    out = block_shift_conjugate(x + 0j, 64, FP16)
    assert np.array_equal(out.real, x / 64)


def test_nan_fraction():
    assert nan_fraction(np.array([1, np.nan, complex(0, np.nan), 2])) == 0.5
    assert nan_fraction(np.array([], complex)) == 0.0


def test_trace_pulse_unit_modulus():
    p = trace_pulse(256)
    assert np.allclose(abs(p), 1.0)
    assert p[128] == 1.0


def _by_label(traces):
    return {t.stage_label: t for t in traces}


def test_trace_labels_and_schema():
    traces, y = trace_matched_filter(1024, PURE_FP16, True, True)
    assert [t.stage_label for t in traces] == [
        "input", "forward_fft", "filter_product", "block_shift", "inverse_fft", "output"]
    row = traces[0].as_row()
    assert set(row) >= {"stage_label", "max_abs", "overflow_count", "nan_count", "theoretical_bound"}
    for t in traces:
        assert isinstance(t, StageTrace)
        assert t.overflow_count + t.nan_count <= 2 * t.n_values
    assert y.shape == (1024,)


def test_no_shift_overflow_certificate():
    st = _by_label(trace_matched_filter(4096, PURE_FP16, False, False)[0])
    assert st["filter_product"].pre_quant_max_abs >= 1e6
    assert st["inverse_fft"].pre_quant_max_abs >= 1e7
    assert st["inverse_fft"].pre_quant_max_abs == 4096.0**2
    assert st["inverse_fft"].overflow_count + st["inverse_fft"].nan_count > 0


@pytest.mark.parametrize("mode", [PURE_FP16, FP16_STORAGE, FP16_MUL_FP32_ACC])
@pytest.mark.parametrize("n", [512, 4096])
def test_no_shift_output_is_nan(mode, n):
    _, y = trace_matched_filter(n, mode, False, False)
    assert nan_fraction(y) > 0.99


@pytest.mark.parametrize("mode", [PURE_FP16, FP16_STORAGE, FP16_MUL_FP32_ACC])
def test_shift_keeps_everything_bounded(mode):
    traces, y = trace_matched_filter(4096, mode, True, True, verbose=True)
    assert len(traces) > 6
    for t in traces:
        assert t.overflow_count == 0 and t.nan_count == 0, t.stage_label
        assert t.max_abs <= FP16_BOUND, t.stage_label
    assert nan_fraction(y) == 0


def test_fp32_shift_commutes():
    for norm in (True, False):
        traces_a, a = trace_matched_filter(4096, FP32_MODE, True, norm)
        traces_b, b = trace_matched_filter(4096, FP32_MODE, False, norm)
        assert np.linalg.norm(a - b) / np.linalg.norm(b) <= 1e-6
        assert all(t.overflow_count == 0 for t in traces_a + traces_b)


def test_shift_output_matches_fp32():
    _, ref = trace_matched_filter(4096, FP32_MODE, True, True)
    _, y = trace_matched_filter(4096, PURE_FP16, True, True)
    from bfpfft.metrics import sqnr_db

    assert sqnr_db(ref, y, align=True) >= 50


def test_custom_signal():
    rng = np.random.default_rng(1)
    sig = np.exp(2j * np.pi * rng.random(256))
    traces, y = trace_matched_filter(256, FP32_MODE, True, False, signal=sig)
    expect = np.fft.ifft(np.fft.fft(sig) * np.conj(np.fft.fft(np.fft.ifftshift(sig))))
    assert np.allclose(y, expect, atol=1e-9)
