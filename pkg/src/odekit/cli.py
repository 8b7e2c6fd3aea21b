"""``odekit`` command-line entry point."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .commands import COMMANDS
from .config import EXPERIMENTS, load_config
from .errors import ConfigError, OdekitError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="odekit", description="Fixed-step ODE experiments in batch.")
    parser.add_argument("--version", action="version", version=f"odekit {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", type=Path, default=None, help="JSON run config (defaults reproduce the canonical run)")
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override the config's seed")
    parser.add_argument("--jobs", type=int, default=1, help="parallel batch workers (solve only)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        print("odekit: error: --jobs must be >= 1", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.experiment, args.config, args.seed)
    except ConfigError as exc:
        print(f"odekit: invalid config: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"odekit: cannot read config: {exc}", file=sys.stderr)
        return 2
    args.out.mkdir(parents=True, exist_ok=True)
    try:
        return COMMANDS[args.experiment](cfg, args.out, args.jobs)
    except OdekitError as exc:
        print(f"odekit: {args.experiment} failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
