#!/usr/bin/env python3
"""ParaTAA CLI"""
import argparse
import logging
import sys

from . import __version__
from .bench import Bench
from .config import load_config
from .errors import ConfigError, ConfigValidationError, ParaTAAError

LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_NOT_CONVERGED = 3


def _int_list(text):
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("grid must not be empty")
    return values


def _name_list(text):
    return [part.strip() for part in text.split(",") if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="parataa",
        description="Parallel sampling of diffusion models as a triangular nonlinear system")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="more logging (-v info, -vv debug)")
    parser.add_argument("-q", "--quiet", action="store_true", help="errors only")
    sub = parser.add_subparsers(dest="command")

    run = sub.add_parser("run", help="solve with the configured variant and write reports")
    run.add_argument("config")
    run.add_argument("--report", help="report CSV path (overrides [output] report_csv)")
    run.add_argument("--summary", help="summary JSON path (overrides [output] summary_json)")

    compare = sub.add_parser("compare", help="paired comparison of several variants")
    compare.add_argument("config")
    compare.add_argument("--variants", type=_name_list,
                         help="comma-separated, e.g. FP,FP+,TAA,TAA-NOSG")
    compare.add_argument("--out", help="comparison CSV path")

    sweep = sub.add_parser("sweep", help="mean iterations over a (k, m) grid")
    sweep.add_argument("config")
    sweep.add_argument("--k-grid", type=_int_list)
    sweep.add_argument("--m-grid", type=_int_list)
    sweep.add_argument("--out", help="sweep CSV path")

    windows = sub.add_parser("windows", help="iterations and evaluations per window size")
    windows.add_argument("config")
    windows.add_argument("--w-grid", type=_int_list)
    windows.add_argument("--out", help="window CSV path")

    sub.add_parser("version", help="print the version")
    return parser


def setup_logging(verbose: int, quiet: bool) -> None:
    level = logging.WARNING
    if quiet:
        level = logging.ERROR
    elif verbose == 1:
        level = logging.INFO
    elif verbose > 1:
        level = logging.DEBUG
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def run_command(args) -> int:
    config = load_config(args.config)
    bench = Bench(config)
    LOGGER.info("command | name=%s | seeds=%d | workers=%d",
                args.command, config.run.seeds, bench.workers)
    if args.command == "run":
        bench.execute("run", report_out=args.report, summary_out=args.summary)
    elif args.command == "compare":
        bench.execute("compare", variants=args.variants, out=args.out)
    elif args.command == "sweep":
        bench.execute("sweep", k_grid=args.k_grid, m_grid=args.m_grid, out=args.out)
    elif args.command == "windows":
        bench.execute("windows", w_grid=args.w_grid, out=args.out)
    if config.run.require_convergence and not bench.all_converged:
        failed = sum(1 for r in bench.results if not r.converged)
        print(f"Error: {failed} of {len(bench.results)} runs did not converge", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose, args.quiet)

    if args.command is None:
        print(f"ParaTAA v{__version__}")
        parser.print_help()
        return EXIT_OK
    if args.command == "version":
        print(f"ParaTAA v{__version__}")
        return EXIT_OK
    try:
        return run_command(args)
    except ConfigValidationError as e:
        for problem in e.problems:
            print(problem.format(), file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as e:
        print(e.format(), file=sys.stderr)
        return EXIT_CONFIG
    except ParaTAAError as e:
        print(e.format(), file=sys.stderr)
        return EXIT_ERROR
    except OSError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
