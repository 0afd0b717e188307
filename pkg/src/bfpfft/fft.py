"""Stockham autosort FFT with per-operation precision emulation.

Every transform works on the last axis of a complex128 array, so a whole
matrix of range lines runs as one batched call. Real and imaginary parts are
kept as separate float64 arrays inside the butterflies so that overflow
behaves componentwise, the way a half-precision ALU would.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .formats import FP16, FP32, FP64, NumericFormat, quantize, quantize_complex

__all__ = [
    "PrecisionMode",
    "MODES",
    "FP32_MODE",
    "PURE_FP16",
    "FP16_STORAGE",
    "FP16_MUL_FP32_ACC",
    "get_mode",
    "storage_only",
    "FftPlan",
    "make_plan",
    "fft_forward",
    "ifft_via_conj",
    "dft_oracle",
]

MAX_N = 2**22


@dataclass(frozen=True)
class PrecisionMode:
    """Where rounding happens inside a transform.

    Operands of a multiply are rounded to ``compute_format``; products and
    sums are rounded to ``accumulate_format``; every value written back to a
    buffer is rounded to ``storage_format``.
    """

    tag: str
    storage_format: NumericFormat
    compute_format: NumericFormat
    accumulate_format: NumericFormat

    @property
    def is_exact(self) -> bool:
        return (self.storage_format.identity and self.compute_format.identity
                and self.accumulate_format.identity)


FP32_MODE = PrecisionMode("fp32", FP32, FP32, FP32)
PURE_FP16 = PrecisionMode("pure_fp16", FP16, FP16, FP16)
FP16_STORAGE = PrecisionMode("fp16_storage_fp32_compute", FP16, FP32, FP32)
FP16_MUL_FP32_ACC = PrecisionMode("fp16_mul_fp32_acc", FP16, FP16, FP32)

MODES = {m.tag: m for m in (FP32_MODE, PURE_FP16, FP16_STORAGE, FP16_MUL_FP32_ACC)}
_MODE_ALIASES = {"fp16": "pure_fp16", "fp16_storage": "fp16_storage_fp32_compute",
                 "fp16_mul": "fp16_mul_fp32_acc"}


def get_mode(tag: str) -> PrecisionMode:
    key = tag.lower().replace("-", "_")
    key = _MODE_ALIASES.get(key, key)
    try:
        return MODES[key]
    except KeyError:
        raise KeyError(f"unknown precision mode {tag!r}; known: {sorted(MODES)}") from None


def storage_only(fmt: NumericFormat) -> PrecisionMode:
    """Storage rounded to ``fmt`` between stages; binary64 compute and twiddles."""
    return PrecisionMode(f"{fmt.name}_storage", fmt, FP64, FP64)


# --------------------------------------------------------------------------
# rounding helpers on split (re, im) pairs


def _q(fmt: NumericFormat, x: np.ndarray) -> np.ndarray:
    return x if fmt.identity else quantize(fmt, x)


def _cadd(mode, ar, ai, br, bi, sign=1.0):
    acc = mode.accumulate_format
    if sign > 0:
        return _q(acc, ar + br), _q(acc, ai + bi)
    return _q(acc, ar - br), _q(acc, ai - bi)


def _cmul(mode, ar, ai, wr, wi):
    """Direct complex multiply: 4 real products, 2 real sums."""
    cf, acc = mode.compute_format, mode.accumulate_format
    ar, ai = _q(cf, ar), _q(cf, ai)
    rr = _q(acc, ar * wr)
    ii = _q(acc, ai * wi)
    ri = _q(acc, ar * wi)
    ir = _q(acc, ai * wr)
    return _q(acc, rr - ii), _q(acc, ri + ir)


def _join(re: np.ndarray, im: np.ndarray) -> np.ndarray:
    out = np.empty(re.shape, dtype=np.complex128)
    out.real = re
    out.imag = im
    return out


# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FftPlan:
    n: int
    radix: int
    stage_radices: tuple[int, ...]
    twiddles: np.ndarray  # twiddles[k] = e^{-2 pi i k / n}, rounded to compute format
    mode: PrecisionMode

    @property
    def stages(self) -> int:
        return len(self.stage_radices)


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def make_plan(n: int, radix: int = 2, mode: PrecisionMode = FP32_MODE) -> FftPlan:
    """Build an immutable transform plan.

    Radix 8 accepts any power of two >= 8; lengths that are not a power of 8
    get one trailing radix-2 or radix-4 stage.
    """
    if radix not in (2, 8):
        raise ValueError(f"radix must be 2 or 8, got {radix}")
    if not _is_pow2(n):
        raise ValueError(f"n must be a power of two, got {n}")
    if n < radix:
        raise ValueError(f"n must be >= radix ({radix}), got {n}")
    if n > MAX_N:
        raise ValueError(f"n must be <= 2**22, got {n}")

    log2n = n.bit_length() - 1
    if radix == 2:
        radices = (2,) * log2n
    else:
        radices = (8,) * (log2n // 3)
        if log2n % 3:
            radices += (2 ** (log2n % 3),)

    k = np.arange(n)
    # per-element binary64 trig, never a recurrence
    tw = np.exp(-2j * np.pi * k / n)
    # snap the exactly known points so cos(pi/2) is 0, not 6e-17
    for frac, val in ((0, 1), (n // 4, -1j), (n // 2, -1), (3 * n // 4, 1j)):
        if frac < n and n % 4 == 0:
            tw[frac] = val
    if n == 2:
        tw[1] = -1
    tw = quantize_complex(mode.compute_format, tw)
    tw.setflags(write=False)
    return FftPlan(n=n, radix=radix, stage_radices=radices, twiddles=tw, mode=mode)


def _butterfly_radix(mode, parts, r):
    """Length-r DFT of the r inputs ``parts`` (lists of (re, im))."""
    if r == 2:
        (ar, ai), (br, bi) = parts
        return [_cadd(mode, ar, ai, br, bi), _cadd(mode, ar, ai, br, bi, -1.0)]
    acc = mode.accumulate_format
    cf = mode.compute_format
    outs = []
    for j in range(r):
        sr = si = None
        for k in range(r):
            e = (j * k) % r
            ar, ai = parts[k]
            if e == 0:
                tr, ti = ar, ai
            elif 4 * e == r:        # * -i
                tr, ti = ai, -ar
            elif 2 * e == r:        # * -1
                tr, ti = -ar, -ai
            elif 4 * e == 3 * r:    # * +i
                tr, ti = -ai, ar
            else:
                w = np.exp(-2j * np.pi * e / r)
                wr, wi = quantize(cf, w.real), quantize(cf, w.imag)
                tr, ti = _cmul(mode, ar, ai, wr, wi)
            if sr is None:
                sr, si = tr, ti
            else:
                sr, si = _q(acc, sr + tr), _q(acc, si + ti)
        outs.append((sr, si))
    return outs


def _stockham(plan: FftPlan, re: np.ndarray, im: np.ndarray, stage_hook=None):
    n = plan.n
    lead = re.shape[:-1]
    st = plan.mode.storage_format
    tw = plan.twiddles
    n_cur, s = n, 1
    for idx, r in enumerate(plan.stage_radices):
        m = n_cur // r
        xr = re.reshape(lead + (r, m, s))
        xi = im.reshape(lead + (r, m, s))
        parts = [(xr[..., k, :, :], xi[..., k, :, :]) for k in range(r)]
        outs = _butterfly_radix(plan.mode, parts, r)
        p = np.arange(m)
        yr = np.empty(lead + (m, r, s))
        yi = np.empty(lead + (m, r, s))
        for j, (br, bi) in enumerate(outs):
            if j:
                w = tw[(p * j * (n // n_cur)) % n][:, None]
                br, bi = _cmul(plan.mode, br, bi, w.real, w.imag)
            yr[..., j, :] = _q(st, br)
            yi[..., j, :] = _q(st, bi)
        re = yr.reshape(lead + (n,))
        im = yi.reshape(lead + (n,))
        if stage_hook is not None:
            stage_hook(idx, re, im)
        n_cur, s = m, s * r
    return re, im


def _check_len(plan: FftPlan, data: np.ndarray) -> None:
    if data.shape[-1] != plan.n:
        raise ValueError(f"data length {data.shape[-1]} does not match plan length {plan.n}")


def fft_forward(plan: FftPlan, data, stage_hook=None) -> np.ndarray:
    """Unnormalized forward DFT along the last axis in the plan's precision.

    ``stage_hook(stage_index, re, im)`` is called after every stage with the
    stored (already rounded) buffers; used by the magnitude tracer.
    """
    data = np.asarray(data, dtype=np.complex128)
    _check_len(plan, data)
    st = plan.mode.storage_format
    with np.errstate(over="ignore", invalid="ignore"):
        re = _q(st, np.array(data.real, dtype=np.float64))
        im = _q(st, np.array(data.imag, dtype=np.float64))
        re, im = _stockham(plan, re, im, stage_hook)
    return _join(re, im)


def ifft_via_conj(plan: FftPlan, data, apply_block_shift: bool = True,
                  stage_hook=None) -> np.ndarray:
    """Normalized inverse DFT computed as conj(FFT(conj(z))).

    With ``apply_block_shift`` the 1/n scale is folded into the input
    conjugate pass; otherwise it is applied to the output, which lets the
    intermediate values grow by a factor of n first.
    """
    from .bfp import block_shift_conjugate

    data = np.asarray(data, dtype=np.complex128)
    _check_len(plan, data)
    st = plan.mode.storage_format
    if apply_block_shift:
        z = block_shift_conjugate(data, plan.n, st)
        y = np.conj(fft_forward(plan, z, stage_hook))
        return y
    z = quantize_complex(st, np.conj(data))
    y = np.conj(fft_forward(plan, z, stage_hook))
    with np.errstate(over="ignore", invalid="ignore"):
        return quantize_complex(st, y * (1.0 / plan.n))


def dft_oracle(data, chunk: int = 512) -> np.ndarray:
    """Direct O(n^2) binary64 DFT along the last axis (ground truth).

    Exponents are reduced as (j*k) mod n before the trig call so large
    arguments never cost accuracy.
    """
    x = np.asarray(data, dtype=np.complex128)
    n = x.shape[-1]
    if n < 1:
        raise ValueError("dft_oracle needs at least one sample")
    roots = np.exp(-2j * np.pi * np.arange(n) / n)
    flat = x.reshape(-1, n)
    out = np.empty_like(flat)
    j = np.arange(n)
    for k0 in range(0, n, chunk):
        k = np.arange(k0, min(k0 + chunk, n))
        w = roots[(k[:, None] * j[None, :]) % n]
        out[:, k] = flat @ w.T
    return out.reshape(x.shape)
