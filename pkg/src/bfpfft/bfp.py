"""Fixed-shift block floating point and the matched-filter magnitude tracer."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .formats import FP64, NumericFormat, quantize_complex
from .fft import FP32_MODE, PrecisionMode, fft_forward, make_plan

__all__ = [
    "StageTrace",
    "block_shift_conjugate",
    "trace_matched_filter",
    "trace_pulse",
    "nan_fraction",
    "TRACE_TIME_BANDWIDTH",
]

# Time-bandwidth product of the tracer's pulse. A full-window, low-TB pulse
# concentrates its spectrum, so the unnormalized filter product reaches a few
# 1e6 at n=4096 and the undivided inverse peaks at n**2.
TRACE_TIME_BANDWIDTH = 4.0


@dataclass(frozen=True)
class StageTrace:
    stage_label: str
    max_abs: float            # over stored values, NaN ignored (inf counts)
    pre_quant_max_abs: float  # same step evaluated with unlimited range
    overflow_count: int       # components stored as +/-inf
    nan_count: int            # components stored as NaN
    theoretical_bound: float
    n_values: int

    def as_row(self) -> dict:
        return asdict(self)


def block_shift_conjugate(data, n: int, storage_format: NumericFormat = FP64) -> np.ndarray:
    """conj(z) * (1/n), rounded to ``storage_format``.

    n is a power of two, so the scale itself is exact in every binary format.
    """
    z = np.asarray(data, dtype=np.complex128)
    if z.shape[-1] != n:
        raise ValueError(f"block shift length {n} does not match data length {z.shape[-1]}")
    out = np.empty_like(z)
    with np.errstate(over="ignore", invalid="ignore"):
        out.real = z.real * (1.0 / n)
        out.imag = -z.imag * (1.0 / n)
    return quantize_complex(storage_format, out)


def nan_fraction(z) -> float:
    """Fraction of complex samples with a NaN in either component."""
    z = np.asarray(z)
    if z.size == 0:
        return 0.0
    return float(np.mean(np.isnan(z.real) | np.isnan(z.imag)))


def _absmax(z: np.ndarray) -> float:
    with np.errstate(over="ignore", invalid="ignore"):
        mag = np.abs(np.asarray(z, dtype=np.complex128))
    mag = mag[~np.isnan(mag)]
    return float(mag.max()) if mag.size else float("nan")


def _stage(label, stored, shadow, bound) -> StageTrace:
    stored = np.asarray(stored, dtype=np.complex128)
    parts = np.concatenate([stored.real.ravel(), stored.imag.ravel()])
    return StageTrace(
        stage_label=label,
        max_abs=_absmax(stored),
        pre_quant_max_abs=_absmax(shadow),
        overflow_count=int(np.isinf(parts).sum()),
        nan_count=int(np.isnan(parts).sum()),
        theoretical_bound=float(bound),
        n_values=int(stored.size),
    )


def trace_pulse(n: int, time_bandwidth: float = TRACE_TIME_BANDWIDTH) -> np.ndarray:
    """Unit-modulus LFM pulse filling all ``n`` samples, centred on index n//2."""
    from .sar import lfm_pulse

    return lfm_pulse(n, time_bandwidth, n)


def trace_matched_filter(
    n: int,
    mode: PrecisionMode,
    with_shift: bool,
    normalize_filter: bool,
    verbose: bool = False,
    signal=None,
    replica=None,
) -> tuple[list[StageTrace], np.ndarray]:
    """Run forward FFT -> filter multiply -> (shift) -> inverse and trace it.

    Returns the stage traces and the final output. Each trace carries the
    stored-value statistics in ``mode`` and the magnitude the same step
    reaches when evaluated at binary64 with unlimited range.
    """
    from .sar import apply_filter, matched_filter_spectrum

    x = trace_pulse(n) if signal is None else np.asarray(signal, dtype=np.complex128)
    ref = x if replica is None else np.asarray(replica, dtype=np.complex128)
    plan = make_plan(n, 2, mode)
    exact = make_plan(n, 2, FP32_MODE)
    st = mode.storage_format
    h = matched_filter_spectrum(ref, normalize_filter)
    h_max = float(np.abs(h).max())
    a = float(np.abs(x).max())

    traces: list[StageTrace] = []
    xq = quantize_complex(st, x)
    traces.append(_stage("input", xq, x, a))

    fwd_hook, fwd_stages = _collect(verbose)
    fwd_exact_hook, fwd_exact = _collect(verbose)
    spec = fft_forward(plan, xq, fwd_hook)
    spec_exact = fft_forward(exact, x, fwd_exact_hook)
    _extend(traces, "forward_fft", fwd_stages, n * a, fwd_exact)
    traces.append(_stage("forward_fft", spec, spec_exact, n * a))

    prod = apply_filter(spec, h, mode)
    prod_exact = spec_exact * h
    traces.append(_stage("filter_product", prod, prod_exact, n * a * h_max))

    if with_shift:
        z = block_shift_conjugate(prod, n, st)
        z_exact = np.conj(prod_exact) / n
        traces.append(_stage("block_shift", z, z_exact, a * h_max))
        inv_bound = n * a * h_max
    else:
        z = quantize_complex(st, np.conj(prod))
        z_exact = np.conj(prod_exact)
        inv_bound = n * n * a * h_max

    inv_hook, inv_stages = _collect(True)
    exact_hook, exact_stages = _collect(True)
    y = fft_forward(plan, z, inv_hook)
    fft_forward(exact, z_exact, exact_hook)
    if verbose:
        _extend(traces, "inverse_fft", inv_stages, inv_bound, exact_stages)
    traces.append(StageTrace(
        stage_label="inverse_fft",
        max_abs=_nanmax([_absmax(s) for s in inv_stages]),
        pre_quant_max_abs=_nanmax([_absmax(s) for s in exact_stages]),
        overflow_count=max(_stage("", s, s, 0).overflow_count for s in inv_stages),
        nan_count=max(_stage("", s, s, 0).nan_count for s in inv_stages),
        theoretical_bound=inv_bound,
        n_values=n,
    ))

    y = np.conj(y)
    y_exact = np.conj(exact_stages[-1])
    if not with_shift:
        with np.errstate(over="ignore", invalid="ignore"):
            y = quantize_complex(st, y * (1.0 / n))
        y_exact = y_exact / n
    traces.append(_stage("output", y, y_exact, n * a * h_max))
    return traces, y


def _nanmax(vals) -> float:
    vals = [v for v in vals if not np.isnan(v)]
    return max(vals) if vals else float("nan")


def _collect(enabled: bool):
    stages: list[np.ndarray] = []
    if not enabled:
        return None, stages

    def hook(idx, re, im):
        z = np.empty(re.shape, dtype=np.complex128)
        z.real, z.imag = re, im
        stages.append(z)

    return hook, stages


def _extend(traces, label, stages, bound, shadow=None):
    for i, s in enumerate(stages):
        sh = s if shadow is None else shadow[i]
        traces.append(_stage(f"{label}/stage{i + 1}", s, sh, bound))
