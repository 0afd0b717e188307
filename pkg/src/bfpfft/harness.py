"""Experiment runners behind the ``bfpfft`` command.

Each runner takes an :class:`ExperimentConfig`, writes CSV/JSON (and SVG or
PNG where relevant) into ``output_dir`` and returns an :class:`ExperimentResult`
with the rows and, in check mode, the list of violated bounds.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__
from .bfp import nan_fraction, trace_matched_filter
from .fft import (
    FP32_MODE,
    MODES,
    dft_oracle,
    fft_forward,
    get_mode,
    make_plan,
    storage_only,
)
from .formats import format_table, lookup
from .metrics import metric_deltas, sqnr_db
from .plots import magnitude_png, svg_stage_bars
from .sar import SarSceneConfig, export_image, focus, rda_pipeline, simulate_scene

log = logging.getLogger(__name__)

EXPERIMENTS = ("fft-sqnr", "fft-trace", "sar", "format-sweep", "bench")
FORMAT_TABLE_VERSION = "1"

# acceptance bounds used by --check
FFT_FP16_SQNR_DB = (56.0, 64.0)
FFT_FP32_MIN_SQNR_DB = 120.0
SWEEP_BOUNDS_DB = {"fp16": (60.0, 65.0), "e4m3": (17.0, 22.0), "e5m2": (11.0, 16.0)}
TRACE_PRODUCT_MIN = 1e6
TRACE_INVERSE_MIN = 1e7
NAN_CERTIFICATE = 0.99
FP32_COMMUTATION_REL = 1e-6
SAR_DELTA_BOUNDS = {
    "d_pslr_db": 0.1,
    "d_islr_db": 0.2,
    "d_snr_db": 0.1,
    "d_range_res_bins": 0.02,
    "d_azimuth_res_bins": 0.02,
}
E2E_SQNR_DB = (40.0, 45.0)


@dataclass
class ExperimentConfig:
    experiment: str
    sizes: list[int] = field(default_factory=list)
    modes: list[str] = field(default_factory=list)
    trials: int = 200
    seed: int = 0
    bfp: str = "both"
    normalize_filter: str = "both"
    output_dir: Path = Path("results")
    emit: tuple[str, ...] = ("csv", "json", "svg")
    check: bool = False
    full_scale: Optional[int] = None
    formats: list[str] = field(default_factory=list)
    radix: int = 2
    batch: int = 16
    runs: int = 30

    def __post_init__(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; choose from {EXPERIMENTS}")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        for n in self.sizes:
            if n < 2 or n & (n - 1):
                raise ValueError(f"size {n} is not a power of two")
        for m in self.modes:
            get_mode(m)
        for flag in ("bfp", "normalize_filter"):
            if getattr(self, flag) not in ("on", "off", "both"):
                raise ValueError(f"{flag} must be on, off or both")
        self.output_dir = Path(self.output_dir)
        self.modes = [get_mode(m).tag for m in self.modes]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["output_dir"] = str(self.output_dir)
        d["emit"] = sorted(self.emit)
        return d

    def digest(self) -> str:
        d = self.to_dict()
        d.pop("output_dir")
        d.pop("emit")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


@dataclass
class ExperimentResult:
    name: str
    rows: list[dict]
    files: list[Path] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)
    extra_tables: dict[str, list[dict]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.failures


def _flags(value: str) -> list[bool]:
    return {"on": [True], "off": [False], "both": [False, True]}[value]


def _workers() -> int:
    try:
        cap = int(os.environ.get("BFPFFT_THREADS", "1"))
    except ValueError:
        cap = 1
    return max(1, min(cap, os.cpu_count() or 1))


def _map(fn: Callable, items: list) -> list:
    if _workers() == 1 or len(items) < 2:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=_workers()) as pool:
        return list(pool.map(fn, items))


def _clean(v):
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return round(v, 10)
    if isinstance(v, (np.floating, np.integer)):
        return _clean(v.item())
    return v


def _envelope(cfg: ExperimentConfig, table: str) -> dict:
    return {
        "artifact": "bfpfft",
        "version": __version__,
        "table": table,
        "config_digest": cfg.digest(),
        "format_table_version": FORMAT_TABLE_VERSION,
        "formats": [
            {"name": f.name, "exponent_bits": f.exponent_bits, "mantissa_bits": f.mantissa_bits,
             "max_finite": f.max_finite, "has_infinity": f.has_infinity}
            for f in format_table()
        ],
        "config": cfg.to_dict() | {"output_dir": None},
    }


def write_table(cfg: ExperimentConfig, table: str, rows: list[dict]) -> list[Path]:
    """Emit ``rows`` as CSV (leading comment lines hold the metadata) and JSON."""
    out = cfg.output_dir
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    rows = [{k: _clean(v) for k, v in r.items()} for r in rows]
    meta = _envelope(cfg, table)
    files = []
    if "csv" in cfg.emit:
        path = out / f"{table}.csv"
        header: list[str] = []
        for r in rows:
            header += [k for k in r if k not in header]
        with open(path, "w", newline="") as fh:
            fh.write(f"# artifact=bfpfft version={__version__} table={table} "
                     f"config_digest={meta['config_digest']} "
                     f"format_table_version={FORMAT_TABLE_VERSION}\n")
            writer = csv.DictWriter(fh, fieldnames=header, lineterminator="\n")
            writer.writeheader()
            writer.writerows(rows)
        files.append(path)
    if "json" in cfg.emit:
        path = out / f"{table}.json"
        path.write_text(json.dumps({"metadata": meta, "rows": rows}, indent=2, sort_keys=True) + "\n")
        files.append(path)
    return files


def _check_range(failures, label, value, lo, hi):
    if not (isinstance(value, (int, float)) and lo <= value <= hi):
        failures.append(f"{label}: {value} outside [{lo}, {hi}]")


# --------------------------------------------------------------------------


def random_trials(n: int, trials: int, seed: int) -> np.ndarray:
    """Complex uniform([-1, 1]) inputs; the stream depends only on (seed, n)."""
    rng = np.random.default_rng([seed, n])
    return rng.uniform(-1.0, 1.0, (trials, n)) + 1j * rng.uniform(-1.0, 1.0, (trials, n))


def fft_sqnr_cell(n: int, mode, trials: int, seed: int, radix: int = 2) -> dict:
    x = random_trials(n, trials, seed)
    ref = dft_oracle(x)
    y = fft_forward(make_plan(n, radix, mode), x)
    vals = [sqnr_db(ref[i], y[i]) for i in range(trials)]
    finite = [v for v in vals if not math.isnan(v)]
    return {
        "n": n,
        "mode": mode.tag,
        "radix": radix,
        "trials": trials,
        "mean_sqnr_db": statistics.fmean(finite) if finite else float("nan"),
        "median_sqnr_db": statistics.median(finite) if finite else float("nan"),
        "min_sqnr_db": min(finite) if finite else float("nan"),
        "max_sqnr_db": max(finite) if finite else float("nan"),
        "nan_trials": len(vals) - len(finite),
    }


def run_fft_sqnr(cfg: ExperimentConfig) -> ExperimentResult:
    sizes = cfg.sizes or [1024, 4096]
    modes = cfg.modes or ["fp32", "pure_fp16", "fp16_storage_fp32_compute", "fp16_mul_fp32_acc"]
    cells = [(n, get_mode(m)) for n in sizes for m in modes]
    rows = _map(lambda c: fft_sqnr_cell(c[0], c[1], cfg.trials, cfg.seed, cfg.radix), cells)
    rows.sort(key=lambda r: (r["n"], r["mode"]))
    res = ExperimentResult("fft_sqnr", rows, write_table(cfg, "fft_sqnr", rows))
    if cfg.check:
        for r in rows:
            if r["mode"] == "pure_fp16" and r["n"] in (1024, 4096):
                _check_range(res.failures, f"fft-sqnr pure_fp16 n={r['n']}",
                             r["mean_sqnr_db"], *FFT_FP16_SQNR_DB)
            if r["mode"] == "fp32":
                _check_range(res.failures, f"fft-sqnr fp32 n={r['n']}",
                             r["mean_sqnr_db"], FFT_FP32_MIN_SQNR_DB, math.inf)
    return res


def run_format_sweep(cfg: ExperimentConfig) -> ExperimentResult:
    sizes = cfg.sizes or [1024, 4096]
    names = cfg.formats or ["fp16", "bf16", "e4m3", "e5m2"]
    cells = [(n, lookup(f)) for n in sizes for f in names]

    def cell(c):
        n, fmt = c
        row = fft_sqnr_cell(n, storage_only(fmt), cfg.trials, cfg.seed)
        row["format"] = fmt.name
        row["mantissa_bits"] = fmt.mantissa_bits
        return row

    rows = _map(cell, cells)
    rows.sort(key=lambda r: (r["n"], r["format"]))
    res = ExperimentResult("format_sweep", rows, write_table(cfg, "format_sweep", rows))
    if cfg.check:
        for r in rows:
            if r["format"] in SWEEP_BOUNDS_DB:
                _check_range(res.failures, f"format-sweep {r['format']} n={r['n']}",
                             r["mean_sqnr_db"], *SWEEP_BOUNDS_DB[r["format"]])
    return res


def run_fft_trace(cfg: ExperimentConfig) -> ExperimentResult:
    sizes = cfg.sizes or [4096]
    modes = cfg.modes or ["pure_fp16", "fp32"]
    rows: list[dict] = []
    files: list[Path] = []
    failures: list[str] = []
    outputs = {}
    for n in sizes:
        for tag in modes:
            mode = get_mode(tag)
            series = {}
            for shift in _flags(cfg.bfp):
                for norm in _flags(cfg.normalize_filter):
                    traces, y = trace_matched_filter(n, mode, shift, norm)
                    outputs[(n, tag, shift, norm)] = y
                    frac = nan_fraction(y)
                    for i, t in enumerate(traces):
                        rows.append({"n": n, "mode": tag, "shift": shift, "normalize_filter": norm,
                                     "step": i, **t.as_row(), "output_nan_fraction": frac})
                    series[f"shift={'on' if shift else 'off'} norm={'on' if norm else 'off'}"] = [
                        (t.stage_label, t.max_abs) for t in traces]
            if "svg" in cfg.emit:
                cfg.output_dir.mkdir(parents=True, exist_ok=True)
                path = cfg.output_dir / f"fft_trace_{tag}_{n}.svg"
                path.write_text(svg_stage_bars(f"matched-filter magnitudes, {tag}, n={n}", series))
                files.append(path)
    files = write_table(cfg, "fft_trace", rows) + files
    if cfg.check:
        failures += check_trace(rows, outputs)
    return ExperimentResult("fft_trace", rows, files, failures)


def check_trace(rows: list[dict], outputs: dict) -> list[str]:
    """Overflow certificate and boundedness bounds on trace rows."""
    failures = []
    by = {}
    for r in rows:
        by.setdefault((r["n"], r["mode"], r["shift"], r["normalize_filter"]), {})[r["stage_label"]] = r
    for (n, mode, shift, norm), st in by.items():
        if mode == "pure_fp16" and not shift and not norm and n == 4096:
            if not st["filter_product"]["pre_quant_max_abs"] >= TRACE_PRODUCT_MIN:
                failures.append("trace: filter product pre-quantization max < 1e6")
            if not st["inverse_fft"]["pre_quant_max_abs"] >= TRACE_INVERSE_MIN:
                failures.append("trace: inverse pre-quantization max < 1e7")
            if not st["output"]["output_nan_fraction"] > NAN_CERTIFICATE:
                failures.append("trace: no-shift output NaN fraction <= 0.99")
        if mode == "pure_fp16" and shift and norm:
            bound = n * (1 + 2.0**-9)
            for label, r in st.items():
                if r["overflow_count"] or r["nan_count"]:
                    failures.append(f"trace n={n}: {label} has overflow/NaN with shift")
                if not r["max_abs"] <= bound:
                    failures.append(f"trace n={n}: {label} max {r['max_abs']} > {bound}")
    for (n, mode, shift, norm), y in outputs.items():
        if mode == "fp32" and shift:
            other = outputs.get((n, mode, False, norm))
            if other is not None:
                rel = float(np.linalg.norm(y - other) / np.linalg.norm(other))
                if not rel <= FP32_COMMUTATION_REL:
                    failures.append(f"trace fp32 n={n}: shift vs divide-after rel {rel:.3g}")
    return failures


def run_sar(cfg: ExperimentConfig) -> ExperimentResult:
    n = cfg.full_scale or (cfg.sizes[0] if cfg.sizes else 1024)
    scene = SarSceneConfig(n_range=n, n_azimuth=n).resolved()
    modes = cfg.modes or ["fp32", "pure_fp16", "fp16_storage_fp32_compute", "fp16_mul_fp32_acc"]
    raw = simulate_scene(scene, cfg.seed)
    reference = focus(raw, FP32_MODE, True).samples
    _, ref_report = rda_pipeline(scene, FP32_MODE, True, cfg.seed, reference=reference, raw=raw)

    rows, summary, deltas, files = [], [], [], []
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    norm = cfg.normalize_filter != "off"
    for tag in modes:
        mode = get_mode(tag)
        for bfp in _flags(cfg.bfp):
            t0 = time.perf_counter()
            image, report = rda_pipeline(scene, mode, bfp, cfg.seed, normalize_filter=norm,
                                         reference=reference, raw=raw)
            log.info("sar %s bfp=%s: %.1fs", tag, bfp, time.perf_counter() - t0)
            summary.append({"mode": tag, "bfp": bfp, "n": n, "nan_fraction": report.nan_fraction,
                            "end_to_end_sqnr_db": report.end_to_end_sqnr_db,
                            "metrics_suppressed": report.metrics_suppressed,
                            "config_digest": scene.digest()})
            for tm in report.per_target:
                rows.append({"mode": tag, "bfp": bfp, "target": tm.index, **{
                    k: v for k, v in asdict(tm).items() if k != "index"}})
            if not report.metrics_suppressed:
                for d in metric_deltas(report, ref_report):
                    deltas.append({"mode": tag, "bfp": bfp, "target": d.pop("index"), **d})
            stem = f"sar_{tag}_{'bfp' if bfp else 'nobfp'}_{n}"
            files.append(magnitude_png(cfg.output_dir / f"{stem}.png", image))
            files += export_image(image, cfg.output_dir / f"{stem}.c16", scene,
                                  extra={"mode": tag, "bfp": bfp, "seed": cfg.seed})
    key = lambda r: (r["mode"], r["bfp"], r.get("target", -1))
    rows.sort(key=key)
    summary.sort(key=key)
    deltas.sort(key=key)
    files = (write_table(cfg, "sar_quality", rows) + write_table(cfg, "sar_summary", summary)
             + write_table(cfg, "sar_deltas", deltas) + files)
    res = ExperimentResult("sar", rows, files, extra_tables={"summary": summary, "deltas": deltas})
    if cfg.check:
        res.failures = check_sar(summary, deltas)
    return res


def check_sar(summary: list[dict], deltas: list[dict]) -> list[str]:
    failures = []
    for d in deltas:
        if d["mode"] == "fp32" or not d["bfp"]:
            continue
        for k, bound in SAR_DELTA_BOUNDS.items():
            if not d[k] <= bound:
                failures.append(f"sar {d['mode']} target {d['target']}: {k}={d[k]:.4g} > {bound}")
    for s in summary:
        if s["mode"] == "pure_fp16" and s["bfp"]:
            _check_range(failures, "sar pure_fp16 end-to-end SQNR",
                         s["end_to_end_sqnr_db"], *E2E_SQNR_DB)
    return failures


def run_bench(cfg: ExperimentConfig) -> ExperimentResult:
    """Host-CPU timing of the emulated transforms; informational only."""
    sizes = cfg.sizes or [1024, 4096]
    modes = cfg.modes or ["fp32", "pure_fp16"]
    rows = []
    for n in sizes:
        x = random_trials(n, cfg.batch, cfg.seed)
        for tag in modes:
            plan = make_plan(n, cfg.radix, get_mode(tag))
            times = []
            for _ in range(cfg.runs):
                t0 = time.perf_counter()
                fft_forward(plan, x)
                times.append(time.perf_counter() - t0)
            med = statistics.median(times)
            rows.append({"n": n, "mode": tag, "radix": cfg.radix, "batch": cfg.batch,
                         "runs": cfg.runs, "median_s": med,
                         "gflops": 5 * n * math.log2(n) * cfg.batch / med / 1e9,
                         "note": "host CPU, emulated precision; not comparable to GPU figures"})
    base = {r["n"]: r["median_s"] for r in rows if r["mode"] == "fp32"}
    for r in rows:
        if r["n"] in base:
            r["time_ratio_vs_fp32"] = r["median_s"] / base[r["n"]]
    rows.sort(key=lambda r: (r["n"], r["mode"]))
    return ExperimentResult("bench", rows, write_table(cfg, "bench", rows))


RUNNERS = {
    "fft-sqnr": run_fft_sqnr,
    "fft-trace": run_fft_trace,
    "sar": run_sar,
    "format-sweep": run_format_sweep,
    "bench": run_bench,
}


def run(cfg: ExperimentConfig) -> ExperimentResult:
    return RUNNERS[cfg.experiment](cfg)
