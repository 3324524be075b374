"""Command-line entry point: ``python -m app.cli <command> [flags]``.

Exit codes: 0 success, 2 configuration error, 3 solver error, 4 data error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional

from app.cli import commands
from app.config import settings
from app.errors import IsingLearnError

LOGGER = logging.getLogger(__name__)


def _add_penalty_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--rho", default=None, help="Penalty weight as a rational (derived when omitted)")
    parser.add_argument(
        "--lambda",
        dest="lambda_policy",
        default="auto",
        help="Order-reduction weight: 'auto' or 'fixed:<value>'",
    )


def _add_schedule_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--sweeps", type=int, default=None, help="Sweeps per restart (default: sweeps_per_var x vars)")
    parser.add_argument("--restarts", type=int, default=None, help="Independent restarts")
    parser.add_argument("--seed", type=int, default=None, help="Base seed; restart r uses seed + r")
    parser.add_argument("--time-budget", type=float, default=None, help="Per-restart budget in ms")
    parser.add_argument("--exact", action="store_true", help="Use exhaustive enumeration instead of annealing")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ising-learn", description="Compile QNN training into QUBO and solve it.")
    parser.add_argument("--log-level", default=settings.log_level, help="Logging level (default from settings)")
    sub = parser.add_subparsers(dest="command", required=True)

    compile_parser = sub.add_parser("compile", help="Compile a network and dataset into QUBO artifacts")
    compile_parser.add_argument("--net", required=True)
    compile_parser.add_argument("--data", required=True)
    compile_parser.add_argument("--out", default=str(settings.output_dir))
    _add_penalty_flags(compile_parser)
    compile_parser.set_defaults(handler=commands.cmd_compile)

    solve_parser = sub.add_parser("solve", help="Search a QUBO file for ground states")
    solve_parser.add_argument("qubo")
    solve_parser.add_argument("--out", default=str(settings.output_dir))
    _add_schedule_flags(solve_parser)
    solve_parser.set_defaults(handler=commands.cmd_solve)

    train_parser = sub.add_parser("train", help="Compile, solve, decode and evaluate")
    train_parser.add_argument("--net", required=True)
    train_parser.add_argument("--data", required=True)
    train_parser.add_argument("--test-data", default=None)
    train_parser.add_argument("--out", default=str(settings.output_dir))
    _add_penalty_flags(train_parser)
    _add_schedule_flags(train_parser)
    train_parser.set_defaults(handler=commands.cmd_train)

    spins_parser = sub.add_parser("count-spins", help="Spin budget over an (H, L, N) grid")
    spins_parser.add_argument("--net", default=None)
    spins_parser.add_argument("--inputs", type=int, default=4)
    spins_parser.add_argument("--input-bits", type=int, default=0)
    spins_parser.add_argument("--hidden", type=int, nargs="+", default=None)
    spins_parser.add_argument("--layers", type=int, nargs="+", default=None)
    spins_parser.add_argument("--samples", type=int, nargs="+", default=None)
    spins_parser.set_defaults(handler=commands.cmd_count_spins)

    mnist_parser = sub.add_parser("preprocess-mnist", help="Tri-level patch features of an MNIST digit pair")
    mnist_parser.add_argument("--data-dir", default=str(settings.data_dir))
    mnist_parser.add_argument("--split", choices=("train", "test"), default="train")
    mnist_parser.add_argument("--digits", type=int, nargs=2, default=(6, 9))
    mnist_parser.add_argument("--threshold", type=int, default=settings.binarize_threshold)
    mnist_parser.add_argument("--t1", type=float, default=settings.tri_level_low)
    mnist_parser.add_argument("--t2", type=float, default=settings.tri_level_high)
    mnist_parser.add_argument("--per-class", type=int, default=0, help="Stratified subset size (0 keeps all)")
    mnist_parser.add_argument("--seed", type=int, default=0)
    mnist_parser.add_argument("--fetch", action="store_true", help="Download missing IDX files first")
    mnist_parser.add_argument("--out", required=True)
    mnist_parser.set_defaults(handler=commands.cmd_preprocess_mnist)

    moon_parser = sub.add_parser("gen-two-moon", help="Generate a quantized two-moon dataset")
    moon_parser.add_argument("--samples", type=int, default=50)
    moon_parser.add_argument("--noise", type=float, default=0.1)
    moon_parser.add_argument("--seed", type=int, default=0)
    moon_parser.add_argument("--input-bits", type=int, default=3)
    moon_parser.add_argument("--out", required=True)
    moon_parser.set_defaults(handler=commands.cmd_gen_two_moon)
    return parser


def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    try:
        args.handler(args)
    except IsingLearnError as exc:
        LOGGER.error("%s: %s", type(exc).__name__, exc)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
