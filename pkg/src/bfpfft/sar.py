"""Point-target SAR simulation and Range-Doppler focusing in emulated precision.

Matrix convention: ``range-major`` means rows are azimuth (slow time) and
columns are range (fast time), i.e. each row is one range line.
``azimuth-major`` is the transpose. Transforms always run along the last
axis, so the pipeline transposes between the range and azimuth passes.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .bfp import nan_fraction
from .fft import (
    FP32_MODE,
    PrecisionMode,
    _cmul,
    _join,
    _q,
    fft_forward,
    ifft_via_conj,
    make_plan,
)
from .formats import quantize_complex

C_LIGHT = 299_792_458.0
RANGE_MAJOR = "range-major"
AZIMUTH_MAJOR = "azimuth-major"

DEFAULT_PULSE_S = 10e-6
RCMC_TAPS = 8


@dataclass(frozen=True)
class Target:
    range_offset_m: float
    azimuth_offset_m: float
    amplitude: float = 1.0


@dataclass(frozen=True)
class SarSceneConfig:
    """Radar and geometry parameters of a point-target scene.

    ``pulse_duration``, ``prf`` and ``antenna_length`` default to values
    derived from the matrix size (see :meth:`resolved`); ``targets`` defaults
    to a five-target cross.
    """

    carrier_frequency: float = 9.6e9
    bandwidth: float = 1.0e8
    pulse_duration: Optional[float] = None
    range_sample_rate: float = 1.2e8
    platform_velocity: float = 100.0
    closest_range: float = 2.0e4
    prf: Optional[float] = None
    antenna_length: Optional[float] = None
    n_range: int = 1024
    n_azimuth: int = 1024
    noise_snr_db: float = 20.0
    targets: Optional[tuple[Target, ...]] = None

    @property
    def wavelength(self) -> float:
        return C_LIGHT / self.carrier_frequency

    @property
    def range_spacing(self) -> float:
        return C_LIGHT / (2.0 * self.range_sample_rate)

    @property
    def azimuth_spacing(self) -> float:
        return self.platform_velocity / self.prf

    @property
    def pulse_samples(self) -> int:
        return int(round(self.pulse_duration * self.range_sample_rate))

    def resolved(self) -> "SarSceneConfig":
        """Fill in derived defaults.

        * pulse: 10 us, capped at n_range/8 samples so the compressed output
          of a unit-amplitude echo stays O(1) under a peak-normalized filter;
        * antenna length: chosen so the synthetic aperture spans n_azimuth/4
          pulses;
        * PRF: 1.25 x the azimuth Doppler bandwidth 2v/L (20% margin);
        * targets: one at scene centre and four at +/- n/4 bins along range
          and azimuth.
        """
        cfg = self
        if cfg.pulse_duration is None:
            samples = min(round(DEFAULT_PULSE_S * cfg.range_sample_rate), cfg.n_range // 8)
            cfg = replace(cfg, pulse_duration=samples / cfg.range_sample_rate)
        if cfg.antenna_length is None:
            aperture = cfg.n_azimuth / 4
            la = math.sqrt(2.5 * cfg.closest_range * cfg.wavelength / aperture)
            cfg = replace(cfg, antenna_length=la)
        if cfg.prf is None:
            cfg = replace(cfg, prf=1.25 * 2.0 * cfg.platform_velocity / cfg.antenna_length)
        if cfg.targets is None:
            dr = cfg.range_spacing * (cfg.n_range // 4)
            dx = cfg.azimuth_spacing * (cfg.n_azimuth // 4)
            cfg = replace(cfg, targets=(
                Target(0.0, 0.0), Target(-dr, 0.0), Target(dr, 0.0),
                Target(0.0, -dx), Target(0.0, dx),
            ))
        else:
            cfg = replace(cfg, targets=tuple(
                t if isinstance(t, Target) else Target(*t) for t in cfg.targets))
        cfg.validate()
        return cfg

    def validate(self) -> None:
        for name in ("n_range", "n_azimuth"):
            n = getattr(self, name)
            if n < 8 or n & (n - 1):
                raise ValueError(f"{name} must be a power of two >= 8, got {n}")
        if self.range_sample_rate < 1.2 * self.bandwidth:
            raise ValueError("range_sample_rate must be >= 1.2 * bandwidth")
        if self.pulse_duration is not None and self.pulse_samples > self.n_range // 2:
            raise ValueError(
                f"pulse is {self.pulse_samples} samples; must be <= n_range/2 = {self.n_range // 2}")
        if self.prf is not None and self.antenna_length is not None:
            doppler_bw = 2.0 * self.platform_velocity / self.antenna_length
            if self.prf < 1.2 * doppler_bw:
                raise ValueError("prf must exceed the Doppler bandwidth by >= 20%")

    def synthetic_aperture(self, slant_range: float) -> float:
        return slant_range * self.wavelength / self.antenna_length

    def target_pixel(self, t: Target) -> tuple[float, float]:
        """(azimuth row, range column) where a target focuses."""
        row = self.n_azimuth / 2 + t.azimuth_offset_m / self.azimuth_spacing
        col = self.n_range / 2 + t.range_offset_m / self.range_spacing
        return row, col

    def to_dict(self) -> dict:
        d = asdict(self)
        d["targets"] = None if self.targets is None else [asdict(t) for t in self.targets]
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=float)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class RawDataMatrix:
    samples: np.ndarray
    layout: str
    config: SarSceneConfig
    scale: float = 1.0  # factor applied to the echoes to make max |sample| <= 1
    meta: dict = field(default_factory=dict)

    @property
    def rows(self) -> int:
        return self.samples.shape[0]

    @property
    def cols(self) -> int:
        return self.samples.shape[1]

    def with_samples(self, samples: np.ndarray, layout: Optional[str] = None) -> "RawDataMatrix":
        return RawDataMatrix(samples, layout or self.layout, self.config, self.scale, dict(self.meta))


# --------------------------------------------------------------------------
# pulses and filters


def lfm_pulse(n_samples: int, time_bandwidth: float, total: int) -> np.ndarray:
    """Unit-amplitude baseband LFM pulse, t=0 at index total//2, zero elsewhere.

    The phase is pi*K*t^2 with K*T^2 = time_bandwidth, written in samples.
    """
    if n_samples > total:
        raise ValueError(f"pulse of {n_samples} samples does not fit in {total}")
    out = np.zeros(total, dtype=np.complex128)
    c = total // 2
    k = np.arange(-(n_samples // 2), n_samples - n_samples // 2)
    out[c + k] = np.exp(1j * np.pi * time_bandwidth * (k / n_samples) ** 2)
    return out


def make_chirp(config: SarSceneConfig) -> np.ndarray:
    """Range reference chirp, centred in an ``n_range`` buffer."""
    cfg = config if config.pulse_duration is not None else config.resolved()
    n_p = cfg.pulse_samples
    if n_p > cfg.n_range:
        raise ValueError(f"pulse of {n_p} samples is longer than n_range={cfg.n_range}")
    return lfm_pulse(n_p, cfg.bandwidth * cfg.pulse_duration, cfg.n_range)


def matched_filter_spectrum(replica, normalize: bool = True) -> np.ndarray:
    """H = conj(FFT(replica)) with the replica's centre moved to index 0.

    ``normalize`` scales H to max |H| = 1. Computed at binary64.
    """
    replica = np.asarray(replica, dtype=np.complex128)
    h = np.conj(np.fft.fft(np.fft.ifftshift(replica)))
    if normalize:
        h = h / np.abs(h).max()
    return h


def apply_filter(spec, h, mode: PrecisionMode) -> np.ndarray:
    """Pointwise spec*h in ``mode``: operands at compute, product at accumulate,
    result stored."""
    spec = np.asarray(spec, dtype=np.complex128)
    h = quantize_complex(mode.compute_format, np.asarray(h, dtype=np.complex128))
    with np.errstate(over="ignore", invalid="ignore"):
        re, im = _cmul(mode, spec.real, spec.imag, h.real, h.imag)
        st = mode.storage_format
        return _join(_q(st, re), _q(st, im))


# --------------------------------------------------------------------------
# scene


def _echo_rows(cfg: SarSceneConfig, t: Target):
    """Row indices, slant ranges and fractional range bins of a target's echo."""
    r0 = cfg.closest_range + t.range_offset_m
    half_ap = cfg.synthetic_aperture(r0) / 2
    eta = (np.arange(cfg.n_azimuth) - cfg.n_azimuth / 2) / cfg.prf
    along = cfg.platform_velocity * eta - t.azimuth_offset_m
    rows = np.nonzero(np.abs(along) <= half_ap)[0]
    slant = np.sqrt(r0**2 + along[rows] ** 2)
    centre = cfg.n_range / 2 + (slant - cfg.closest_range) / cfg.range_spacing
    return rows, slant, centre


def simulate_scene(config: SarSceneConfig, seed: int = 0) -> RawDataMatrix:
    """Raw echo matrix (range-major) of the configured point targets plus noise.

    Noise is circular white Gaussian with power 10**(-snr/10) relative to a
    unit-amplitude echo. The whole matrix is then scaled so max |sample| = 1.
    """
    cfg = config.resolved()
    n_az, n_r = cfg.n_azimuth, cfg.n_range
    n_p = cfg.pulse_samples
    tbp = cfg.bandwidth * cfg.pulse_duration
    lo, hi = -(n_p // 2), n_p - n_p // 2 - 1
    data = np.zeros((n_az, n_r), dtype=np.complex128)
    cols = np.arange(n_r)

    for idx, t in enumerate(cfg.targets):
        rows, slant, centre = _echo_rows(cfg, t)
        if rows.size == 0:
            raise ValueError(f"target {idx} is never illuminated")
        row_t, _ = cfg.target_pixel(t)
        half_ap = cfg.synthetic_aperture(cfg.closest_range + t.range_offset_m) / 2
        half_rows = half_ap / cfg.azimuth_spacing
        if (row_t - half_rows < 0 or row_t + half_rows >= n_az
                or centre.min() + lo < 0 or centre.max() + hi >= n_r):
            raise ValueError(f"target {idx} echo falls outside the scene extent")
        u = cols[None, :] - centre[:, None]
        inside = (u >= lo - 0.5) & (u < hi + 0.5)
        phase = np.pi * tbp * (u / n_p) ** 2 - 4.0 * np.pi * slant[:, None] / cfg.wavelength
        data[rows] += np.where(inside, t.amplitude * np.exp(1j * phase), 0.0)

    if math.isfinite(cfg.noise_snr_db):
        rng = np.random.default_rng(seed)
        sigma = math.sqrt(10.0 ** (-cfg.noise_snr_db / 10.0) / 2.0)
        data += sigma * (rng.standard_normal((n_az, n_r)) + 1j * rng.standard_normal((n_az, n_r)))

    peak = float(np.abs(data).max())
    scale = 1.0 / peak if peak > 0 else 1.0
    data *= scale
    return RawDataMatrix(data, RANGE_MAJOR, cfg, scale, {"seed": seed})


# --------------------------------------------------------------------------
# processing steps


BLOCK_ELEMENTS = 1 << 20


def _by_rows(fn, data: np.ndarray, *row_args) -> np.ndarray:
    """Apply ``fn(block, *row_arg_blocks)`` to row blocks to bound memory."""
    rows = max(BLOCK_ELEMENTS // data.shape[-1], 1)
    if rows >= data.shape[0]:
        return fn(data, *row_args)
    out = np.empty(data.shape, dtype=np.complex128)
    for r0 in range(0, data.shape[0], rows):
        sl = slice(r0, r0 + rows)
        out[sl] = fn(data[sl], *(a[sl] for a in row_args))
    return out


def _require(matrix: RawDataMatrix, layout: str, op: str) -> None:
    if matrix.layout != layout:
        raise ValueError(f"{op} needs {layout} layout, got {matrix.layout}")


def transpose(matrix: RawDataMatrix) -> RawDataMatrix:
    other = AZIMUTH_MAJOR if matrix.layout == RANGE_MAJOR else RANGE_MAJOR
    return matrix.with_samples(np.ascontiguousarray(matrix.samples.T), other)


def range_compress(matrix: RawDataMatrix, mode: PrecisionMode, bfp: bool = True,
                   normalize_filter: bool = True) -> RawDataMatrix:
    """Matched-filter every range line: FFT -> x H -> inverse, all in ``mode``."""
    _require(matrix, RANGE_MAJOR, "range_compress")
    cfg = matrix.config
    plan = make_plan(cfg.n_range, 2, mode)
    h = matched_filter_spectrum(make_chirp(cfg), normalize_filter)

    def line(block):
        spec = fft_forward(plan, quantize_complex(mode.storage_format, block))
        return ifft_via_conj(plan, apply_filter(spec, h, mode), apply_block_shift=bfp)

    return matrix.with_samples(_by_rows(line, matrix.samples))


def azimuth_fft(matrix: RawDataMatrix) -> RawDataMatrix:
    """Forward FFT along azimuth, always at working precision."""
    _require(matrix, AZIMUTH_MAJOR, "azimuth_fft")
    plan = make_plan(matrix.cols, 2, FP32_MODE)
    return matrix.with_samples(_by_rows(lambda b: fft_forward(plan, b), matrix.samples))


def _migration_factor(cfg: SarSceneConfig) -> np.ndarray:
    """D(f) for the FFT-ordered Doppler axis."""
    f = np.fft.fftfreq(cfg.n_azimuth, d=1.0 / cfg.prf)
    return np.sqrt(1.0 - (cfg.wavelength * f / (2.0 * cfg.platform_velocity)) ** 2)


def _bin_ranges(cfg: SarSceneConfig) -> np.ndarray:
    return cfg.closest_range + (np.arange(cfg.n_range) - cfg.n_range / 2) * cfg.range_spacing


def rcmc(matrix: RawDataMatrix, config: Optional[SarSceneConfig] = None) -> RawDataMatrix:
    """Range cell migration correction in the range-Doppler domain.

    Each cell (range r, Doppler f) is read from range r/D(f) with an 8-tap
    Hann-tapered sinc interpolator (weights normalized to unit DC gain).
    """
    _require(matrix, AZIMUTH_MAJOR, "rcmc")
    cfg = config or matrix.config
    d = _migration_factor(cfg)
    rr = _bin_ranges(cfg)
    data = matrix.samples
    n_r, n_f = data.shape
    out = np.empty_like(data)
    step = max(BLOCK_ELEMENTS // n_r, 1)
    for c0 in range(0, n_f, step):
        cs = slice(c0, min(c0 + step, n_f))
        out[:, cs] = _interp_columns(data[:, cs], rr, d[cs], cfg.range_spacing)
    return matrix.with_samples(out)


def _interp_columns(data: np.ndarray, rr: np.ndarray, d: np.ndarray, spacing: float) -> np.ndarray:
    n_r = data.shape[0]
    shift = rr[:, None] * (1.0 / d[None, :] - 1.0) / spacing
    src = np.arange(n_r)[:, None] + shift
    base = np.floor(src).astype(np.int64)
    frac = src - base
    cols = np.broadcast_to(np.arange(data.shape[1])[None, :], base.shape)
    out = np.zeros_like(data)
    wsum = np.zeros(data.shape)
    half = RCMC_TAPS // 2
    for k in range(-half + 1, half + 1):
        x = k - frac
        w = np.sinc(x) * (0.5 + 0.5 * np.cos(np.pi * x / half))
        idx = base + k
        valid = (idx >= 0) & (idx < n_r)
        vals = data[np.clip(idx, 0, n_r - 1), cols]
        out += np.where(valid, w * vals, 0.0)
        wsum += w
    out /= wsum
    return out


def azimuth_filter(cfg: SarSceneConfig) -> np.ndarray:
    """H_az[r, f] = exp(+i 4 pi R_r D(f) / lambda), one row per range bin."""
    d = _migration_factor(cfg)
    rr = _bin_ranges(cfg)
    return np.exp(1j * 4.0 * np.pi * rr[:, None] * d[None, :] / cfg.wavelength)


def azimuth_compress(matrix: RawDataMatrix, config: Optional[SarSceneConfig] = None,
                     mode: PrecisionMode = FP32_MODE, bfp: bool = True) -> RawDataMatrix:
    """Load the range-Doppler data into ``mode`` storage, apply the azimuth
    matched filter and invert along azimuth."""
    _require(matrix, AZIMUTH_MAJOR, "azimuth_compress")
    cfg = config or matrix.config
    plan = make_plan(cfg.n_azimuth, 2, mode)

    def line(block, h):
        prod = apply_filter(quantize_complex(mode.storage_format, block), h, mode)
        return ifft_via_conj(plan, prod, apply_block_shift=bfp)

    return matrix.with_samples(_by_rows(line, matrix.samples, azimuth_filter(cfg)))


def focus(raw: RawDataMatrix, mode: PrecisionMode, bfp: bool = True,
          normalize_filter: bool = True) -> RawDataMatrix:
    """Full Range-Doppler chain; returns a range-major complex image."""
    m = range_compress(raw, mode, bfp, normalize_filter)
    m = transpose(m)
    m = azimuth_fft(m)
    m = rcmc(m)
    m = azimuth_compress(m, mode=mode, bfp=bfp)
    return transpose(m)


def rda_pipeline(config: SarSceneConfig, mode: PrecisionMode, bfp: bool = True,
                 seed: int = 0, normalize_filter: bool = True,
                 reference: Optional[np.ndarray] = None, raw: Optional[RawDataMatrix] = None):
    """Simulate, focus and score one run against an fp32 run of the same scene.

    Returns ``(image, report)`` where image is the complex range-major image.
    Pass ``reference`` (an fp32 image of the same config and seed) to skip the
    reference run.
    """
    from .metrics import quality_report

    cfg = config.resolved()
    if raw is None:
        raw = simulate_scene(cfg, seed)
    image = focus(raw, mode, bfp, normalize_filter).samples
    if reference is None:
        if mode == FP32_MODE:
            reference = image
        else:
            reference = focus(raw, FP32_MODE, True, normalize_filter).samples
    report = quality_report(image, reference, cfg, mode, bfp)
    return image, report


# --------------------------------------------------------------------------
# export


def export_image(image: np.ndarray, path, config: SarSceneConfig,
                 layout: str = RANGE_MAJOR, extra: Optional[dict] = None) -> tuple[Path, Path]:
    """Write row-major (re, im) binary64 pairs plus a JSON sidecar descriptor."""
    path = Path(path)
    data = np.ascontiguousarray(image, dtype=np.complex128)
    data.astype("<c16").tofile(path)
    sidecar = path.with_suffix(path.suffix + ".json")
    desc = {
        "rows": int(data.shape[0]),
        "cols": int(data.shape[1]),
        "dtype": "complex128-le (re, im) pairs, row-major",
        "layout": layout,
        "config_digest": config.digest(),
        "config": config.to_dict(),
    }
    if extra:
        desc.update(extra)
    sidecar.write_text(json.dumps(desc, indent=2, sort_keys=True, default=float) + "\n")
    return path, sidecar


def load_image(path) -> tuple[np.ndarray, dict]:
    path = Path(path)
    desc = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    data = np.fromfile(path, dtype="<c16").reshape(desc["rows"], desc["cols"])
    return data, desc


__all__ = [
    "Target",
    "SarSceneConfig",
    "RawDataMatrix",
    "lfm_pulse",
    "make_chirp",
    "matched_filter_spectrum",
    "apply_filter",
    "simulate_scene",
    "transpose",
    "range_compress",
    "azimuth_fft",
    "rcmc",
    "azimuth_filter",
    "azimuth_compress",
    "focus",
    "rda_pipeline",
    "export_image",
    "load_image",
    "nan_fraction",
]
