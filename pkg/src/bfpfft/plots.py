"""Static SVG charts and PNG magnitude images, written without a plotting library."""

from __future__ import annotations

import math
import struct
import zlib
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

FP16_MAX = 65504.0
_COLORS = ("#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860")


def svg_stage_bars(title: str, series: dict[str, list[tuple[str, float]]],
                   limit: float = FP16_MAX) -> str:
    """Grouped log-scale bar chart of per-stage magnitudes with a limit line.

    ``series`` maps a legend label to a list of (stage_label, value). Infinite
    or NaN values are drawn as full-height hatched bars.
    """
    stages: list[str] = []
    for pts in series.values():
        for label, _ in pts:
            if label not in stages:
                stages.append(label)
    finite = [v for pts in series.values() for _, v in pts if math.isfinite(v) and v > 0]
    lo = math.floor(math.log10(min(finite + [1e-3])))
    hi = math.ceil(math.log10(max(finite + [limit * 10])))
    w, h, ml, mb, mt = 860, 420, 70, 110, 40
    pw, ph = w - ml - 20, h - mb - mt
    group_w = pw / max(len(stages), 1)
    bar_w = group_w * 0.8 / max(len(series), 1)

    def ypos(v: float) -> float:
        return mt + ph - (math.log10(v) - lo) / (hi - lo) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
           f'font-family="sans-serif" font-size="11">',
           '<defs><pattern id="hatch" width="6" height="6" patternUnits="userSpaceOnUse">'
           '<path d="M0,6 L6,0" stroke="#c00" stroke-width="1.5"/></pattern></defs>',
           f'<text x="{w / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>']
    for e in range(lo, hi + 1):
        y = ypos(10.0**e)
        out.append(f'<line x1="{ml}" x2="{ml + pw}" y1="{y:.1f}" y2="{y:.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{ml - 6}" y="{y + 4:.1f}" text-anchor="end">1e{e}</text>')
    for si, (name, pts) in enumerate(series.items()):
        color = _COLORS[si % len(_COLORS)]
        vals = dict(pts)
        for gi, stage in enumerate(stages):
            if stage not in vals:
                continue
            v = vals[stage]
            x = ml + gi * group_w + group_w * 0.1 + si * bar_w
            if not math.isfinite(v):
                y, fill = mt, "url(#hatch)"
            else:
                y, fill = ypos(max(v, 10.0**lo)), color
            out.append(f'<rect x="{x:.1f}" y="{y:.1f}" width="{bar_w:.1f}" '
                       f'height="{mt + ph - y:.1f}" fill="{fill}" stroke="{color}"/>')
        ly = h - 20 - 14 * (len(series) - 1 - si)
        out.append(f'<rect x="{ml}" y="{ly - 9}" width="10" height="10" fill="{color}"/>')
        out.append(f'<text x="{ml + 14}" y="{ly}">{escape(name)}</text>')
    yl = ypos(limit)
    out.append(f'<line x1="{ml}" x2="{ml + pw}" y1="{yl:.1f}" y2="{yl:.1f}" '
               f'stroke="#c00" stroke-dasharray="6,3"/>')
    out.append(f'<text x="{ml + pw}" y="{yl - 4:.1f}" text-anchor="end" fill="#c00">'
               f'fp16 max {limit:g}</text>')
    for gi, stage in enumerate(stages):
        x = ml + gi * group_w + group_w / 2
        y = mt + ph + 12
        out.append(f'<text x="{x:.1f}" y="{y}" text-anchor="end" '
                   f'transform="rotate(-35 {x:.1f} {y})">{escape(stage)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_png_gray(path, pixels: np.ndarray) -> Path:
    """Write an 8-bit grayscale PNG from a 2-D uint8 array."""
    path = Path(path)
    img = np.ascontiguousarray(pixels, dtype=np.uint8)
    height, width = img.shape
    raw = b"".join(b"\x00" + img[r].tobytes() for r in range(height))

    def chunk(tag: bytes, data: bytes) -> bytes:
        body = tag + data
        return struct.pack(">I", len(data)) + body + struct.pack(">I", zlib.crc32(body) & 0xFFFFFFFF)

    png = b"\x89PNG\r\n\x1a\n"
    png += chunk(b"IHDR", struct.pack(">IIBBBBB", width, height, 8, 0, 0, 0, 0))
    png += chunk(b"IDAT", zlib.compress(raw, 6))
    png += chunk(b"IEND", b"")
    path.write_bytes(png)
    return path


def magnitude_png(path, image: np.ndarray, dynamic_range_db: float = 60.0) -> Path:
    """Log-scaled magnitude image; NaN pixels are drawn white."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        mag = np.abs(image)
        finite = mag[np.isfinite(mag)]
        peak = float(finite.max()) if finite.size and finite.max() > 0 else 1.0
        db = 20.0 * np.log10(mag / peak)
    scaled = np.clip((db + dynamic_range_db) / dynamic_range_db, 0.0, 1.0) * 254.0
    scaled = np.where(np.isnan(mag) | np.isinf(mag), 255.0, scaled)
    return write_png_gray(path, np.nan_to_num(scaled, nan=255.0).astype(np.uint8))
