"""The ``enc-relay`` command line

Usage::

    enc-relay <command> --config <path> [--out <path>] [--seed N] [--strict]
        [--verbosity LEVEL]

Exit codes: 0 on success, 2 when the configuration is invalid (with one JSON
line ``{"error": "config", "message": ...}`` on standard error) and 3 when
``--strict`` is given and every requested point is infeasible.
"""

__all__ = ["EXIT_CONFIG", "EXIT_INFEASIBLE", "EXIT_OK", "main"]

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from encrelay.cli import tables
from encrelay.cli.config import COMMANDS, ConfigError, RunConfig, load_config
from encrelay.cli.figures import reproduce

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="enc-relay",
        description=(
            "Analyze, optimize and simulate Enhanced Network Coding on a "
            "two-way relay with a finite buffer"
        ),
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON configuration file")
    parser.add_argument(
        "--out",
        default=None,
        help="output CSV path (a directory for reproduce-fig); default: stdout",
    )
    parser.add_argument("--seed", type=int, default=None, help="overrides the config")
    parser.add_argument(
        "--strict",
        action="store_true",
        help="exit with status 3 when every requested point is infeasible",
    )
    parser.add_argument(
        "--verbosity",
        default="WARNING",
        choices=("DEBUG", "INFO", "WARNING", "ERROR"),
        help="logging level on stderr",
    )
    return parser


def _config_error(message: str) -> int:
    print(json.dumps({"error": "config", "message": message}), file=sys.stderr)
    return EXIT_CONFIG


def _table(config: RunConfig, seed: int) -> tables.Table:
    params = config.params
    if config.command == "analyze":
        return tables.analyze_table(params)
    if config.command == "optimize":
        return tables.optimize_table(params)
    if config.command == "tradeoff":
        return tables.tradeoff_table(params)
    if config.command == "simulate":
        return tables.simulate_table(params, seed)
    return tables.overflow_table(params, seed)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.verbosity),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )

    try:
        config = load_config(args.config, args.command)
        seed = config.seed if args.seed is None else args.seed
        if not 0 <= seed < 1 << 64:
            raise ConfigError(f"'--seed' must fit in 64 unsigned bits; got {seed}")
        out = args.out if args.out is not None else config.output_path

        if config.command == "reproduce-fig":
            out_dir = Path(out if out is not None else ".")
            reproduce(config.params, seed, out_dir, config.csv_precision)
            return EXIT_OK

        table = _table(config, seed)
    # ConfigError included: every input comes from the config
    except ValueError as e:
        return _config_error(str(e))
    except OSError as e:
        return _config_error(f"Cannot write output: {e}")

    if out is None:
        tables.write_csv(sys.stdout, table, config.csv_precision)
    else:
        try:
            with open(out, "w", newline="", encoding="utf-8") as f:
                tables.write_csv(f, table, config.csv_precision)
        except OSError as e:
            return _config_error(f"Cannot write output: {e}")
        logger.info("Wrote %d rows to %s", len(table.rows), out)

    if args.strict and table.all_infeasible:
        logger.warning("Every requested point is infeasible")
        return EXIT_INFEASIBLE
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
