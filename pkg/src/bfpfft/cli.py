"""``bfpfft`` command line entry point."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .harness import EXPERIMENTS, ExperimentConfig, run


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}") from None


def _str_list(text: str) -> list[str]:
    return [v for v in text.replace(",", " ").split() if v]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="bfpfft",
        description="Run emulated low-precision FFT and SAR experiments.",
    )
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--sizes", type=_int_list, default=[], help="transform sizes, e.g. 1024,4096")
    p.add_argument("--modes", type=_str_list, default=[],
                   help="precision modes: fp32, pure_fp16, fp16_storage_fp32_compute, fp16_mul_fp32_acc")
    p.add_argument("--formats", type=_str_list, default=[], help="formats for format-sweep")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bfp", choices=("on", "off", "both"), default="both")
    p.add_argument("--normalize-filter", choices=("on", "off", "both"), default=None,
                   help="default: both for fft-trace, on elsewhere")
    p.add_argument("--emit", type=_str_list, default=["csv", "json", "svg"])
    p.add_argument("--out", type=Path, default=Path("results"))
    p.add_argument("--check", action="store_true", help="exit nonzero if acceptance bounds are missed")
    p.add_argument("--full-scale", type=int, default=None, help="SAR scene size, e.g. 4096")
    p.add_argument("--radix", type=int, choices=(2, 8), default=2)
    p.add_argument("--batch", type=int, default=16, help="bench batch size")
    p.add_argument("--runs", type=int, default=30, help="bench repetitions")
    p.add_argument("-v", "--verbose", action="store_true")
    p.add_argument("--version", action="version", version=f"bfpfft {__version__}")
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    bad = set(args.emit) - {"csv", "json", "svg"}
    if bad:
        print(f"bfpfft: unknown --emit value(s): {', '.join(sorted(bad))}", file=sys.stderr)
        return 2
    norm = args.normalize_filter or ("both" if args.experiment == "fft-trace" else "on")
    try:
        cfg = ExperimentConfig(
            experiment=args.experiment, sizes=args.sizes, modes=args.modes, trials=args.trials,
            seed=args.seed, bfp=args.bfp, normalize_filter=norm, output_dir=args.out,
            emit=tuple(args.emit), check=args.check, full_scale=args.full_scale,
            formats=args.formats, radix=args.radix, batch=args.batch, runs=args.runs,
        )
        result = run(cfg)
    except (ValueError, KeyError) as exc:
        print(f"bfpfft: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"bfpfft: {exc}", file=sys.stderr)
        return 3
    for path in result.files:
        print(path)
    if args.check:
        for msg in result.failures:
            print(f"FAIL {msg}", file=sys.stderr)
        print(f"check: {'PASS' if result.passed else 'FAIL'} ({len(result.failures)} violation(s))")
        return 0 if result.passed else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
