"""Command line entry point: price, experiment, selftest."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import METHODS, load_config
from .errors import ConfigError, NumericalFailure
from .harness import EXPERIMENTS, run_experiment, run_price
from .solvers import PRESETS

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def build_parser():
    parser = argparse.ArgumentParser(prog="fbsde-pricing", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("price", help="price one configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--seed", type=int)

    e = sub.add_parser("experiment", help="reproduce a published table")
    e.add_argument("name", help=", ".join(EXPERIMENTS))
    e.add_argument("--dims", type=int, nargs="+")
    e.add_argument("--preset", choices=sorted(PRESETS))
    e.add_argument("--jobs", type=int, default=1)
    e.add_argument("--mc-paths", type=int)
    e.add_argument("--seed", type=int, default=2020)
    e.add_argument("--output-dir")

    sub.add_parser("selftest", help="run the built-in property checks")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "price":
            config = load_config(args.config)
            if args.method or args.seed is not None:
                config = config.with_overrides(args.method, args.seed)
            r = run_price(config)
            extra = "" if r.dispersion is None else f" +/- {r.dispersion:.6f}"
            print(f"{r.method} {r.contract} d={r.dims}: {r.price:.6f}{extra} ({r.wall_clock_s:.1f}s)")
        elif args.command == "experiment":
            _, table = run_experiment(args.name, args.dims, args.preset, args.jobs, args.seed,
                                      args.mc_paths, args.output_dir)
            print(table)
        else:
            from .selftest import run_selftest
            return EXIT_OK if run_selftest() else 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, IsADirectoryError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
