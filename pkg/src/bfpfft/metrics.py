"""Scale-aligned SQNR and point-target quality metrics (PSLR, ISLR, 3 dB width, SNR)."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "CutProfile",
    "TargetMetrics",
    "QualityReport",
    "optimal_scale",
    "sqnr_db",
    "extract_cut",
    "pslr_db",
    "islr_db",
    "resolution_3db",
    "target_snr_db",
    "background_region",
    "quality_report",
    "ISLR_WINDOW_BINS",
    "DEFAULT_UPSAMPLE",
]

ISLR_WINDOW_BINS = 32
DEFAULT_UPSAMPLE = 16
METRIC_NAN_LIMIT = 0.01


@dataclass(frozen=True)
class CutProfile:
    """Upsampled magnitude cut through a peak.

    ``samples`` is rolled so the peak sits near the middle; ``peak_index`` is
    the fractional (parabolic) peak position in upsampled samples.
    """

    samples: np.ndarray
    upsample_factor: int
    peak_index: float
    peak_value: float
    native_peak: float = float("nan")  # fractional peak in native image bins


def optimal_scale(reference, test) -> float:
    """Real alpha minimizing sum |ref - alpha*test|^2 (0 for an all-zero test)."""
    ref = np.asarray(reference, dtype=np.complex128).ravel()
    tst = np.asarray(test, dtype=np.complex128).ravel()
    if ref.shape != tst.shape:
        raise ValueError(f"length mismatch: {ref.size} vs {tst.size}")
    den = float(np.sum(tst.real**2 + tst.imag**2))
    if den == 0.0:
        return 0.0
    return float(np.sum((ref * np.conj(tst)).real)) / den


def sqnr_db(reference, test, align: bool = False) -> float:
    """10 log10(sum|ref|^2 / sum|ref - alpha*test|^2).

    alpha is the optimal real scale when ``align`` else 1. Returns +inf for an
    exact match and NaN when ``test`` holds NaN or inf: a broken run is never
    averaged into a finite number.
    """
    ref = np.asarray(reference, dtype=np.complex128).ravel()
    tst = np.asarray(test, dtype=np.complex128).ravel()
    if ref.shape != tst.shape:
        raise ValueError(f"length mismatch: {ref.size} vs {tst.size}")
    sig = float(np.sum(ref.real**2 + ref.imag**2))
    if sig == 0.0:
        raise ValueError("reference is all zero; SQNR undefined")
    if not np.all(np.isfinite(tst)):
        return float("nan")
    alpha = optimal_scale(ref, tst) if align else 1.0
    err = ref - alpha * tst
    noise = float(np.sum(err.real**2 + err.imag**2))
    if noise == 0.0:
        return float("inf")
    return 10.0 * math.log10(sig / noise)


def _upsample_line(line: np.ndarray, factor: int) -> np.ndarray:
    """Band-limited interpolation by zero-padding the spectrum.

    The Nyquist bin of an even-length line is split between +/- fs/2 so the
    interpolant of a real-symmetric input stays symmetric.
    """
    n = line.size
    spec = np.fft.fft(line)
    big = np.zeros(n * factor, dtype=np.complex128)
    h = n // 2
    big[:h] = spec[:h]
    big[-h:] = spec[-h:]
    if n % 2 == 0:
        big[h] = 0.5 * spec[h]
        big[-h] = 0.5 * spec[h]
    else:
        big[h] = spec[h]
    return np.fft.ifft(big) * factor


def extract_cut(image, target_position, axis: int, upsample_factor: int = DEFAULT_UPSAMPLE,
                search: int = 3) -> CutProfile:
    """Upsampled cut along ``axis`` through the peak nearest ``target_position``.

    axis=1 cuts along range (a row), axis=0 along azimuth (a column).
    The peak is searched within +/- ``search`` bins of the expected position.
    """
    if upsample_factor < 1 or upsample_factor & (upsample_factor - 1):
        raise ValueError("upsample_factor must be a power of two")
    img = np.asarray(image)
    rows, cols = img.shape
    r0, c0 = (int(round(p)) for p in target_position)
    if not (0 <= r0 < rows and 0 <= c0 < cols):
        raise ValueError(f"target position {target_position} outside image {img.shape}")
    r_lo, r_hi = max(r0 - search, 0), min(r0 + search + 1, rows)
    c_lo, c_hi = max(c0 - search, 0), min(c0 + search + 1, cols)
    win = np.abs(img[r_lo:r_hi, c_lo:c_hi])
    if np.isnan(win).any():
        raise ValueError("NaN around target; cut undefined")
    dr, dc = np.unravel_index(int(np.argmax(win)), win.shape)
    pr, pc = r_lo + dr, c_lo + dc
    if pr in (0, rows - 1) or pc in (0, cols - 1):
        raise ValueError("peak lies on the image border")

    if axis == 1:
        line, native = img[pr, :], pc
    elif axis == 0:
        line, native = img[:, pc], pr
    else:
        raise ValueError("axis must be 0 (azimuth) or 1 (range)")
    n = line.size
    up = np.abs(_upsample_line(np.asarray(line, dtype=np.complex128), upsample_factor))

    # roll so the native peak lands mid-array, then refine locally
    shift = n * upsample_factor // 2 - native * upsample_factor
    up = np.roll(up, shift)
    centre = n * upsample_factor // 2
    lo, hi = centre - upsample_factor, centre + upsample_factor + 1
    k = lo + int(np.argmax(up[lo:hi]))
    y0, y1, y2 = up[k - 1], up[k], up[k + 1]
    den = y0 - 2 * y1 + y2
    off = 0.5 * (y0 - y2) / den if den != 0 else 0.0
    peak_val = y1 - 0.25 * (y0 - y2) * off
    peak_idx = k + off
    return CutProfile(
        samples=up,
        upsample_factor=upsample_factor,
        peak_index=float(peak_idx),
        peak_value=float(peak_val),
        native_peak=float(native + (peak_idx - centre) / upsample_factor),
    )


def _nulls(cut: CutProfile, window_bins: int) -> tuple[int, int, int, int]:
    s = cut.samples
    u = cut.upsample_factor
    k = int(round(cut.peak_index))
    lo = max(k - window_bins * u, 0)
    hi = min(k + window_bins * u, s.size - 1)
    right = k
    while right < hi and s[right + 1] <= s[right]:
        right += 1
    left = k
    while left > lo and s[left - 1] <= s[left]:
        left -= 1
    if right >= hi or left <= lo:
        raise ValueError("no mainlobe null found inside the cut window")
    return lo, left, right, hi


def pslr_db(cut: CutProfile, window_bins: int = ISLR_WINDOW_BINS) -> float:
    """Highest sidelobe relative to the mainlobe peak, in dB."""
    lo, left, right, hi = _nulls(cut, window_bins)
    s = cut.samples
    side = max(s[lo:left + 1].max(), s[right:hi + 1].max())
    return 20.0 * math.log10(side / cut.peak_value)


def islr_db(cut: CutProfile, window_bins: int = ISLR_WINDOW_BINS) -> float:
    """Sidelobe energy within +/- window_bins over mainlobe (null-to-null) energy."""
    lo, left, right, hi = _nulls(cut, window_bins)
    p = cut.samples.astype(np.float64) ** 2
    main = p[left:right + 1].sum()
    side = p[lo:left].sum() + p[right + 1:hi + 1].sum()
    return 10.0 * math.log10(side / main)


def resolution_3db(cut: CutProfile) -> float:
    """Mainlobe width at peak/sqrt(2), in native bins (linear interpolation)."""
    s = cut.samples
    level = cut.peak_value / math.sqrt(2.0)
    k = int(round(cut.peak_index))
    i = k
    while i + 1 < s.size and s[i + 1] > level:
        i += 1
    if i + 1 >= s.size:
        raise ValueError("mainlobe fills the cut")
    right = i + (s[i] - level) / (s[i] - s[i + 1])
    j = k
    while j - 1 >= 0 and s[j - 1] > level:
        j -= 1
    if j - 1 < 0:
        raise ValueError("mainlobe fills the cut")
    left = j - (s[j] - level) / (s[j] - s[j - 1])
    return float((right - left) / cut.upsample_factor)


def target_snr_db(image, target_position, exclusion_radius: int,
                  background_region, other_targets: Sequence = ()) -> float:
    """20 log10(peak) - 10 log10(mean background power).

    ``background_region`` is a (row_slice, col_slice) pair. It must not come
    within ``exclusion_radius`` of this target or any of ``other_targets``.
    """
    img = np.asarray(image)
    rs, cs = background_region
    bg = img[rs, cs]
    if bg.size == 0:
        raise ValueError("empty background region")
    for pos in (target_position, *other_targets):
        r, c = pos
        r_in = rs.start - exclusion_radius <= r < rs.stop + exclusion_radius
        c_in = cs.start - exclusion_radius <= c < cs.stop + exclusion_radius
        if r_in and c_in:
            raise ValueError(f"background region overlaps target exclusion zone at {pos}")
    r0, c0 = (int(round(p)) for p in target_position)
    e = max(exclusion_radius // 4, 1)
    peak = float(np.abs(img[max(r0 - e, 0):r0 + e + 1, max(c0 - e, 0):c0 + e + 1]).max())
    power = float(np.mean(np.abs(bg) ** 2))
    if power == 0.0:
        return float("inf")
    return 20.0 * math.log10(peak) - 10.0 * math.log10(power)


def background_region(shape) -> tuple[slice, slice]:
    """Target-free corner block (first eighth of each axis)."""
    rows, cols = shape
    return slice(0, max(rows // 8, 1)), slice(0, max(cols // 8, 1))


@dataclass
class TargetMetrics:
    index: int
    row: float
    col: float
    pslr_db: float            # worse of range / azimuth
    islr_db: float            # worse of range / azimuth
    snr_db: float
    range_res_bins: float
    azimuth_res_bins: float
    pslr_range_db: float
    pslr_azimuth_db: float
    islr_range_db: float
    islr_azimuth_db: float
    peak_row: float
    peak_col: float


@dataclass
class QualityReport:
    mode: str
    bfp_active: bool
    nan_fraction: float
    end_to_end_sqnr_db: float
    per_target: list[TargetMetrics] = field(default_factory=list)
    metrics_suppressed: bool = False
    background: tuple[tuple[int, int], tuple[int, int]] = ((0, 0), (0, 0))
    config_digest: str = ""
    suppression_reason: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def quality_report(image, reference, config, mode, bfp: bool,
                   upsample: int = DEFAULT_UPSAMPLE) -> QualityReport:
    """Score a focused image against the fp32 reference of the same scene."""
    from .bfp import nan_fraction

    img = np.asarray(image)
    frac = nan_fraction(img)
    bg = background_region(img.shape)
    report = QualityReport(
        mode=getattr(mode, "tag", str(mode)),
        bfp_active=bool(bfp),
        nan_fraction=frac,
        end_to_end_sqnr_db=float("nan"),
        background=((bg[0].start, bg[0].stop), (bg[1].start, bg[1].stop)),
        config_digest=config.digest(),
    )
    if frac >= METRIC_NAN_LIMIT:
        report.metrics_suppressed = True
        report.suppression_reason = f"NaN fraction {frac:.4g} >= {METRIC_NAN_LIMIT}"
        return report
    report.end_to_end_sqnr_db = sqnr_db(reference, img, align=True)
    positions = [config.target_pixel(t) for t in config.targets]
    try:
        report.per_target = _target_metrics(img, positions, bg, upsample)
    except ValueError as exc:
        # NaN on a target makes its cut meaningless even when the image mostly survived
        report.metrics_suppressed = True
        report.suppression_reason = str(exc)
    return report


def _target_metrics(img, positions, bg, upsample) -> list[TargetMetrics]:
    out = []
    excl = ISLR_WINDOW_BINS
    for i, pos in enumerate(positions):
        rc = extract_cut(img, pos, axis=1, upsample_factor=upsample)
        ac = extract_cut(img, pos, axis=0, upsample_factor=upsample)
        pr, pa = pslr_db(rc), pslr_db(ac)
        ir, ia = islr_db(rc), islr_db(ac)
        others = [p for j, p in enumerate(positions) if j != i]
        out.append(TargetMetrics(
            index=i, row=pos[0], col=pos[1],
            pslr_db=max(pr, pa), islr_db=max(ir, ia),
            snr_db=target_snr_db(img, pos, excl, bg, others),
            range_res_bins=resolution_3db(rc), azimuth_res_bins=resolution_3db(ac),
            pslr_range_db=pr, pslr_azimuth_db=pa, islr_range_db=ir, islr_azimuth_db=ia,
            peak_row=ac.native_peak, peak_col=rc.native_peak,
        ))
    return out


def metric_deltas(report: QualityReport, reference: QualityReport) -> list[dict]:
    """Per-target |test - reference| for every metric."""
    rows = []
    for a, b in zip(report.per_target, reference.per_target):
        rows.append({
            "index": a.index,
            "d_pslr_db": abs(a.pslr_db - b.pslr_db),
            "d_islr_db": abs(a.islr_db - b.islr_db),
            "d_snr_db": abs(a.snr_db - b.snr_db),
            "d_range_res_bins": abs(a.range_res_bins - b.range_res_bins),
            "d_azimuth_res_bins": abs(a.azimuth_res_bins - b.azimuth_res_bins),
            "d_pslr_range_db": abs(a.pslr_range_db - b.pslr_range_db),
            "d_pslr_azimuth_db": abs(a.pslr_azimuth_db - b.pslr_azimuth_db),
            "d_islr_range_db": abs(a.islr_range_db - b.islr_range_db),
            "d_islr_azimuth_db": abs(a.islr_azimuth_db - b.islr_azimuth_db),
        })
    return rows
