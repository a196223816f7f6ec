"""Command-line entry point.

    spinjunction <mode> [--config PATH] [--out DIR] [--seed N] [--threads N]
                        [--override key=value ...]

Exit status is 0 on success, 2 for invalid input and 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import MODES, RunSpec, parse_override
from .errors import NumericalError, ValidationError
from .pipeline import default_threads, run

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERIC = 0, 2, 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinjunction", description="Spin-junction transport pipelines.")
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = sub.add_parser(mode)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int,
                       help="worker processes for sweeps (1 = sequential and bitwise reproducible)")
        p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                       help="set a dotted configuration field, e.g. lead.Jz=0.9")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        spec = RunSpec.load(args.config) if args.config else RunSpec()
        overrides = dict(parse_override(o) for o in args.override)
        overrides["mode"] = args.mode
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.out is not None:
            overrides["out"] = args.out
        spec = spec.with_overrides(overrides)
        bundle = run(spec, threads=default_threads(args.threads))
    except (ValidationError, FileNotFoundError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        for f in getattr(exc, "fields", []):
            print(f"  field: {f}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(json.dumps({"out": bundle.out_dir, "summary": bundle.summary,
                      "failures": len(bundle.failures)}, indent=2, default=str))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
