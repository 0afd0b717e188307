"""Reduced-precision storage formats emulated on a binary64 carrier.

A format is just a quantization lattice: values are carried as float64 and
rounded (round-to-nearest-even) onto the lattice of the target format. The
rounding is done with integer bit manipulation on the float64 encoding, which
is exact and much faster than a frexp/ldexp round trip.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "NumericFormat",
    "FP16",
    "BF16",
    "E4M3",
    "E5M2",
    "FP32",
    "FP64",
    "format_table",
    "lookup",
    "quantize",
    "quantize_complex",
]

_F64_MANT = 52


@dataclass(frozen=True)
class NumericFormat:
    """Descriptor of a binary floating-point storage format.

    ``mantissa_bits`` counts explicit fraction bits (hidden bit excluded).
    ``identity`` formats (fp32/fp64 here) are carried at working precision
    and never rounded.
    """

    name: str
    exponent_bits: int
    mantissa_bits: int
    max_finite: float
    min_normal: float
    has_infinity: bool
    supports_subnormals: bool = True
    saturate: bool = False
    identity: bool = False
    _ulp_shift: int = field(init=False, repr=False, compare=False, default=0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_ulp_shift", _F64_MANT - self.mantissa_bits)

    @property
    def min_subnormal(self) -> float:
        return self.min_normal * 2.0 ** (-self.mantissa_bits)

    def quantize(self, x):
        return quantize(self, x)

    def saturating(self) -> "NumericFormat":
        """Variant that clamps overflow to +/-max_finite instead of inf/NaN."""
        return NumericFormat(
            name=self.name + "-sat",
            exponent_bits=self.exponent_bits,
            mantissa_bits=self.mantissa_bits,
            max_finite=self.max_finite,
            min_normal=self.min_normal,
            has_infinity=self.has_infinity,
            supports_subnormals=self.supports_subnormals,
            saturate=True,
        )


def _ieee(name: str, ebits: int, mbits: int) -> NumericFormat:
    bias = 2 ** (ebits - 1) - 1
    return NumericFormat(
        name=name,
        exponent_bits=ebits,
        mantissa_bits=mbits,
        max_finite=(2.0 - 2.0**-mbits) * 2.0**bias,
        min_normal=2.0 ** (1 - bias),
        has_infinity=True,
    )


FP16 = _ieee("fp16", 5, 10)
BF16 = _ieee("bf16", 8, 7)
E5M2 = _ieee("e5m2", 5, 2)
# OCP E4M3: the all-ones exponent still encodes normals; only S.1111.111 is NaN.
E4M3 = NumericFormat(
    name="e4m3",
    exponent_bits=4,
    mantissa_bits=3,
    max_finite=448.0,
    min_normal=2.0**-6,
    has_infinity=False,
)
FP32 = NumericFormat("fp32", 8, 23, float(np.finfo(np.float32).max),
                     float(np.finfo(np.float32).tiny), True, identity=True)
FP64 = NumericFormat("fp64", 11, 52, float(np.finfo(np.float64).max),
                     float(np.finfo(np.float64).tiny), True, identity=True)

_TABLE = (FP16, BF16, E4M3, E5M2, FP32, FP64)


def format_table() -> list[NumericFormat]:
    """All supported formats, reduced precision first."""
    return list(_TABLE)


def lookup(name: str) -> NumericFormat:
    key = name.lower().replace("_", "").replace("-", "")
    aliases = {"half": "fp16", "float16": "fp16", "bfloat16": "bf16",
               "single": "fp32", "float32": "fp32", "double": "fp64",
               "float64": "fp64", "fp8e4m3": "e4m3", "fp8e5m2": "e5m2",
               "float8e4m3fn": "e4m3", "float8e5m2": "e5m2"}
    key = aliases.get(key, key)
    for fmt in _TABLE:
        if fmt.name == key:
            return fmt
    raise KeyError(f"unknown format {name!r}; known: {[f.name for f in _TABLE]}")


def quantize(fmt: NumericFormat, x):
    """Round ``x`` to the nearest value of ``fmt`` (ties to even).

    Works on scalars and float arrays. Overflow becomes +/-inf for formats
    with infinities, NaN otherwise (or +/-max_finite when ``fmt.saturate``).
    NaN stays NaN and the sign of zero is preserved.
    """
    scalar = np.ndim(x) == 0
    a = np.asarray(x, dtype=np.float64)
    if fmt.identity:
        return float(a) if scalar else a.copy()
    out = _quantize_array(fmt, np.atleast_1d(a))
    return float(out[0]) if scalar else out.reshape(a.shape)


def _quantize_array(fmt: NumericFormat, a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    bits = a.view(np.int64)
    shift = fmt._ulp_shift
    half_minus_one = np.int64((1 << (shift - 1)) - 1)
    low_mask = np.int64(~((1 << shift) - 1))
    # RNE on the magnitude bits; a carry into the exponent field is correct.
    lsb = (bits >> shift) & 1
    rounded = ((bits + half_minus_one + lsb) & low_mask).view(np.float64)

    with np.errstate(invalid="ignore", over="ignore"):
        mag = np.abs(a)
        small = mag < fmt.min_normal
        if small.any():
            step = fmt.min_subnormal
            if fmt.supports_subnormals:
                sub = np.rint(a[small] / step) * step
            else:
                sub = np.zeros_like(a[small])
            rounded[small] = np.copysign(sub, a[small])

        over = np.abs(rounded) > fmt.max_finite
        if over.any():
            if fmt.saturate:
                rounded[over] = np.copysign(fmt.max_finite, a[over])
            elif fmt.has_infinity:
                rounded[over] = np.copysign(np.inf, a[over])
            else:
                rounded[over] = np.nan
        special = ~np.isfinite(a)
        if special.any():
            if fmt.has_infinity or fmt.saturate:
                vals = a[special]
                if fmt.saturate:
                    vals = np.where(np.isinf(vals), np.copysign(fmt.max_finite, vals), vals)
                rounded[special] = vals
            else:
                rounded[special] = np.nan
    return rounded


def quantize_complex(fmt: NumericFormat, z):
    """Componentwise :func:`quantize` of a complex scalar or array."""
    scalar = np.ndim(z) == 0
    z = np.asarray(z, dtype=np.complex128)
    if fmt.identity:
        return complex(z) if scalar else z.copy()
    flat = np.atleast_1d(z)
    out = np.empty_like(flat)
    # assign parts separately: 1j * inf would manufacture a NaN real part
    out.real = _quantize_array(fmt, flat.real)
    out.imag = _quantize_array(fmt, flat.imag)
    return complex(out[0]) if scalar else out.reshape(z.shape)


def ulp_relative_bound(fmt: NumericFormat) -> float:
    """Half-ulp relative rounding bound for normal-range values."""
    return math.ldexp(1.0, -fmt.mantissa_bits - 1)
