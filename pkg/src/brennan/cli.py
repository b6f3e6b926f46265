"""Command line entry point: ``brennan <stage> [options]``.

Exit codes: 0 success, 2 configuration error, 3 stage failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from brennan.config import OUTPUT_ENV, load_config
from brennan.errors import ConfigError, StageFailed
from brennan.pipeline import STAGES, run_stage

EXIT_OK, EXIT_CONFIG, EXIT_STAGE = 0, 2, 3
DEEP_MAX_N = 14  # deeper shells need --long-run


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="brennan", description=__doc__.splitlines()[0])
    ap.add_argument("stage", choices=[*STAGES, "full"])
    ap.add_argument("-c", "--config", help="INI file with [run], [polygon], [conformal], [fit], [series]")
    ap.add_argument("-o", "--output-dir", help=f"artifact directory (overrides ${OUTPUT_ENV} and the config)")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--n-vertices", type=int, help="vertices of the main polygon")
    ap.add_argument("--max-word-length", type=int, help="longest sampled word")
    ap.add_argument("--cluster-size", type=int, help="number of validation polygons")
    ap.add_argument("--cluster-n", type=int, help="vertices of each validation polygon")
    ap.add_argument("--samples", type=int, help="disk samples per generator fit")
    ap.add_argument("--max-radius", type=float, help="sample radius bound in the disk")
    ap.add_argument("--p", type=float, action="append", help="exponent for shell sums (repeatable)")
    ap.add_argument("--max-n", type=int, help="longest word in the shell sums")
    ap.add_argument("--n-min", type=int, help="first shell used in decay fits")
    ap.add_argument("--bracket", type=float, nargs=2, metavar=("LO", "HI"))
    ap.add_argument("--tol", type=float, help="p-star bracket width")
    ap.add_argument("--trivial", action="store_true", help="use the identity homomorphism (test mode)")
    ap.add_argument("--long-run", action="store_true", help=f"allow --max-n above {DEEP_MAX_N}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    return ap


def config_from_args(args):
    cfg = load_config(args.config)
    cfg = cfg.with_overrides(
        output_dir=args.output_dir,
        seed=args.seed,
        polygon__n=args.n_vertices,
        polygon__max_word_length=args.max_word_length,
        polygon__cluster_size=args.cluster_size,
        polygon__cluster_n=args.cluster_n,
        fit__samples=args.samples,
        fit__max_radius=args.max_radius,
        series__p_list=tuple(args.p) if args.p else None,
        series__max_n=args.max_n,
        series__n_min=args.n_min,
        series__bracket=tuple(args.bracket) if args.bracket else None,
        series__tol=args.tol,
        series__homomorphism="trivial" if args.trivial else None,
    )
    cfg.validate()
    if cfg.series.max_n > DEEP_MAX_N and not args.long_run:
        raise ConfigError(f"series.max_n = {cfg.series.max_n} needs --long-run")
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        records = run_stage(args.stage, cfg)
    except StageFailed as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_STAGE
    except OSError as exc:
        print(f"cannot write artifacts: {exc}", file=sys.stderr)
        return EXIT_STAGE
    for rec in records:
        print(f"{rec['stage']}: {rec['status']} in {rec['wall_time_s']:.1f} s -> {', '.join(rec['artifacts'])}")
    if args.stage in ("p-star", "full"):
        lo, hi = json.loads((Path(cfg.output_dir) / "p_star.json").read_text())["bracket"]
        print(f"p* in [{lo:.4f}, {hi:.4f}]")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
