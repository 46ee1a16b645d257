"""
Command-line entry point.

Exit codes: 0 success, 2 input or parameter error, 3 lobe not found,
1 anything else the pipeline reports.
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import scipy.fft
from pydantic import ValidationError

from app.commands import COMMANDS
from app.core.config import load_pipeline_config, settings
from app.core.exceptions import ParameterError, QPhaseError
from app.core.logging import get_logger, set_level

logger = get_logger(__name__)


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    """Top-level parser with one subparser per command; shared flags live on each subcommand."""
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", type=Path, help="Pipeline config JSON")
    shared.add_argument("--threads", type=_positive_int, help="Worker threads for FFTs and tiles")
    shared.add_argument("--seed", type=_seed, help="Seed for synthetic noise")
    shared.add_argument("-v", "--verbose", action="store_true", help="Debug logging")

    parser = argparse.ArgumentParser(
        prog=settings.APP_NAME,
        description="Quantitative phase reconstruction of lateral-shear holograms",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {settings.APP_VERSION}")
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND")
    subparsers.required = True
    for command in COMMANDS:
        command.add_parser(subparsers, shared)
    return parser


def _run_command(args: argparse.Namespace) -> int:
    config = load_pipeline_config(args.config)
    logger.debug(f"Running {args.command} with {args.threads} thread(s)")
    with scipy.fft.set_workers(args.threads):
        return args.handler(args, config)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse arguments, run one subcommand and map failures to exit codes.

    Args:
        argv: Arguments without the program name; sys.argv when None

    Returns:
        Process exit code
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2

    set_level(logging.DEBUG if args.verbose or settings.DEBUG else logging.INFO)
    if args.threads is None:
        args.threads = settings.DEFAULT_THREADS
    if args.seed is None:
        args.seed = settings.DEFAULT_SEED

    try:
        return _run_command(args)
    except QPhaseError as e:
        logger.error(str(e))
        return e.exit_code
    except ValidationError as e:
        logger.error(f"Invalid document ({e.error_count()} errors):\n{e}")
        return ParameterError.exit_code
    except json.JSONDecodeError as e:
        logger.error(f"Malformed JSON at line {e.lineno}, column {e.colno}: {e.msg}")
        return ParameterError.exit_code
    except OSError as e:
        logger.error(f"{e.filename or ''}: {e.strerror or e}")
        return ParameterError.exit_code


def run() -> None:
    """Console script entry point."""
    sys.exit(main())


if __name__ == "__main__":
    run()
