#!/usr/bin/env python3
"""
Command-line entrypoint for the kinetic wave collision lab.

Usage:
    python run.py thresholds --kind gain --M 8
    python run.py scaling --beta 0.25 --M 8 --fit-window 1e2,1e5
    python run.py spectra --beta 0
    python run.py averaging --battery default
    python run.py picard --config config/experiments/picard.yaml

Each command writes <out>/<command>.csv and <out>/<command>.json.
Exit status: 0 ok, 1 error (error JSON on stdout), 2 diagnostic failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

# Add project root to path
project_root = Path(__file__).parent
if str(project_root) not in sys.path:
    sys.path.insert(0, str(project_root))

from config import settings
from src.services.config import build_config, load_config_file
from src.services.experiments import run

logger = logging.getLogger(__name__)

EXIT_ERROR = 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Isotropic 4-wave collision operator: scaling, thresholds, Picard and averaging diagnostics"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="YAML experiment file (flags override it)")
    common.add_argument("--beta", type=float, default=None, help="Kernel homogeneity beta in [0, 1]")
    common.add_argument("--M", type=float, default=None, help="Weight exponent M > 6")
    common.add_argument("--A", type=float, default=None, help="Oscillatory datum offset A")
    common.add_argument("--N", type=int, default=None, help="Oscillatory datum frequency N")
    common.add_argument("--grid", type=str, default=None, help="Geometric grid as omega_min,omega_max,points_per_decade")
    common.add_argument("--tol", type=float, default=None, help="Quadrature relative tolerance")
    common.add_argument("--omega-max", type=float, default=None, help="Truncation of semi-infinite pieces")
    common.add_argument("--fit-window", type=str, default=None, help="Fit window as lo,hi")
    common.add_argument("--samples", type=int, default=None, help="w1 samples per fit")
    common.add_argument("--out", type=str, default=None, help=f"Output directory (default: {settings.OUTPUTS_DIR})")
    common.add_argument("--seed", type=int, default=None, help="Seed for randomized batteries")
    common.add_argument("--verbose", action="store_true", help="Debug logging")

    collision = subparsers.add_parser("collision", parents=[common], help="Per-piece operator values")
    collision.add_argument("--omega1", type=str, default=None, help="Comma-separated w1 values")
    collision.add_argument("--terms", action="store_true", help="Oscillation term decomposition at peaks")

    subparsers.add_parser("scaling", parents=[common], help="Log-log exponents against predictions")

    thresholds = subparsers.add_parser("thresholds", parents=[common], help="Beta sweep for the -M/2 crossing")
    thresholds.add_argument("--kind", type=str, default=None, help="gain, full or oscillatory")

    picard = subparsers.add_parser("picard", parents=[common], help="Picard iterates and contraction factors")
    picard.add_argument("--iterations", type=int, default=None, help="Number of Picard steps")
    picard.add_argument("--mode", type=str, default=None, choices=["full", "gain"], help="Operator to iterate")
    picard.add_argument("--C1", type=float, default=None, help="Trilinear constant (estimated when omitted)")
    picard.add_argument("--trials", type=int, default=None, help="Random triples for the C1 estimate")

    averaging = subparsers.add_parser("averaging", parents=[common], help="Averaging bound and appendix scan")
    averaging.add_argument("--battery", type=str, default=None, help="default or small")

    subparsers.add_parser("spectra", parents=[common], help="Cascade exponents table")
    return parser


def _out_dir(args):
    if getattr(args, "out", None):
        return Path(args.out)
    if getattr(args, "config", None):
        try:
            out = load_config_file(args.config).get("out")
            if out:
                return Path(out)
        except Exception:
            pass
    return settings.OUTPUTS_DIR


def report_error(args, error: Exception):
    payload = {
        "status": "error",
        "error_type": type(error).__name__,
        "message": str(error),
        "command": getattr(args, "command", None),
    }
    text = json.dumps(payload, sort_keys=True, indent=2)
    print(text)
    try:
        out_dir = _out_dir(args)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "error.json").write_text(text + "\n")
    except OSError as e:
        logger.error(f"could not write error.json: {e}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    try:
        config = build_config(args.command, args, args.config)
        return run(config)
    except Exception as e:
        logger.error(f"{args.command} failed: {e}", exc_info=args.verbose)
        report_error(args, e)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
