"""
dsmc-sim command line: run, ab and sweep scenario files
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from dsmc.errors import (
    ConfigurationError,
    CorruptedSignalError,
    InvariantViolation,
    LoopError,
    NumericFailure,
)

from .config import load_scenario
from .export import export_ab, export_result
from .runner import run_ab, run_scenario, sweep

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2
EXIT_INVARIANT = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dsmc-sim",
        description="Adaptive discrete sliding-mode control simulator with ADC uncertainty compensation",
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="warnings and errors only")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, default=None, help="output directory (overrides the scenario)")
    common.add_argument("--format", choices=["csv", "json"], default=None, help="trace file format")
    common.add_argument("--skip-settle", type=float, default=None, metavar="SECONDS",
                        help="seconds excluded from metrics at the start of each run")
    common.add_argument("--strict-invariants", action="store_true",
                        help="abort on any Lyapunov monitor violation")
    common.add_argument("--db", type=Path, default=None,
                        help="register finished runs in this DuckDB file")

    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", parents=[common], help="run one scenario")
    p_run.add_argument("scenario", type=Path)
    p_ab = sub.add_parser("ab", parents=[common], help="run a baseline/compensated pair")
    p_ab.add_argument("scenario", type=Path)
    p_sweep = sub.add_parser("sweep", parents=[common], help="run every scenario in a directory")
    p_sweep.add_argument("directory", type=Path)
    p_sweep.add_argument("--jobs", type=int, default=1, help="worker processes")
    return parser


def configure_logging(verbose: bool = False, quiet: bool = False) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s - %(levelname)s - %(message)s")


def _register(db: Path | None, results, paths: dict[str, Path]) -> None:
    if db is None:
        return
    from storage import duck

    duck.set_database(db)
    for result in results:
        trace = paths.get(f"{result.variant}_trace") or paths.get("trace")
        run_id = duck.register_run(result, trace)
        logger.info("registered %s as run %s", result.name, run_id)


def _run(args: argparse.Namespace) -> int:
    if args.command == "sweep":
        out = args.out or Path("runs")
        summary = sweep(args.directory, out, args.format, args.skip_settle, args.strict_invariants, args.jobs)
        out.mkdir(parents=True, exist_ok=True)
        summary_file = out / "sweep_summary.csv"
        summary.to_csv(summary_file, index=False, float_format="%.17g", lineterminator="\n")
        print(summary_file)
        return EXIT_OK

    sc = load_scenario(args.scenario)
    out = args.out or Path(sc.output.dir)
    fmt = args.format or sc.output.format
    if args.command == "run":
        result = run_scenario(sc, args.strict_invariants, args.skip_settle)
        paths = export_result(result, out, fmt)
        _register(args.db, [result], paths)
    else:
        ab = run_ab(sc, args.strict_invariants, args.skip_settle)
        paths = export_ab(ab, out, fmt)
        _register(args.db, [ab.baseline, ab.compensated], paths)
    for path in paths.values():
        print(path)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    try:
        return _run(args)
    except InvariantViolation as e:
        logger.error("invariant violation: %s", e)
        return EXIT_INVARIANT
    except (NumericFailure, CorruptedSignalError, LoopError) as e:
        logger.error("numeric failure: %s", e)
        return EXIT_NUMERIC
    except ConfigurationError as e:
        logger.error("configuration error: %s", e)
        return EXIT_CONFIG
    except OSError as e:
        logger.error("I/O error: %s", e)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
