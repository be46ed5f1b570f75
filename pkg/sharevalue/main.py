"""
Command line entry point.

    python -m sharevalue report --input panel.csv --out-dir out/
    python -m sharevalue simulate --preset reference --seed 7 --out-dir synthetic/

Exit codes: 0 success, 1 output failure, 2 unreadable input, 3 estimation failure, 64 bad flags.
"""

import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from loguru import logger
from pydantic import ValidationError

from sharevalue import __version__
from sharevalue.config import (
    DEFAULT_ALPHA,
    DEFAULT_BIN_WIDTH,
    LOG_FILE,
    LOG_JSON,
    LOG_LEVEL,
    MAX_WORKERS,
)
from sharevalue.exceptions import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, InvalidArgumentsError, ShareValueError
from sharevalue.schemas.estimation import CovarianceMethod, ModelTag
from sharevalue.schemas.pipeline import PipelineConfig
from sharevalue.schemas.synthetic import SyntheticConfig
from sharevalue.services.pipeline_service import run_pipeline
from sharevalue.utils.logger import setup_logger

ROBUST_CHOICES = ("classical", "white-period")
LOG_LEVELS = ("TRACE", "DEBUG", "INFO", "SUCCESS", "WARNING", "ERROR", "CRITICAL")


class ArgumentParser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so usage errors map to exit 64."""

    def error(self, message: str):
        raise InvalidArgumentsError(f"{self.prog}: {message}")


def parse_years(text: str) -> List[int]:
    """``2008``, ``2006,2008`` or ``2006-2009``."""
    years: List[int] = []
    try:
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            if "-" in part[1:]:
                start, end = part.split("-", 1)
                low, high = int(start), int(end)
                if high < low:
                    raise ValueError(part)
                years.extend(range(low, high + 1))
            else:
                years.append(int(part))
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid year selection '{text}'")
    if not years:
        raise argparse.ArgumentTypeError("empty year selection")
    return sorted(set(years))


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="sharevalue", description="Panel fundamentals and divergence of share prices")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", parser_class=ArgumentParser, required=True)

    common = ArgumentParser(add_help=False)
    common.add_argument("--out-dir", required=True, type=Path, help="Directory for report files")
    common.add_argument("--log-level", type=str.upper, choices=LOG_LEVELS, default=None,
                        help=f"Log level (default {LOG_LEVEL})")

    analysis = ArgumentParser(add_help=False)
    analysis.add_argument("--input", required=True, type=Path, help="Firm-year CSV file")
    analysis.add_argument("--currency", default=None, help="Declared currency of the monetary columns")
    analysis.add_argument("--model", choices=[tag.value for tag in ModelTag], default=None,
                          help="Use this model instead of running the selection tests")
    analysis.add_argument("--robust", choices=ROBUST_CHOICES, default="white-period",
                          help="Coefficient covariance (default white-period)")
    analysis.add_argument("--alpha", type=float, default=DEFAULT_ALPHA, help="Test level")
    analysis.add_argument("--bin-width", type=float, default=DEFAULT_BIN_WIDTH,
                          help="Histogram bin width in log units")
    analysis.add_argument("--years", type=parse_years, default=None,
                          help="Years to export histograms for, e.g. 2006-2009 or 2007,2008")
    analysis.add_argument("--max-workers", type=int, default=MAX_WORKERS, help="Threads for candidate fits")

    helps = {
        "fit": "Fit one model (--model, default fe_twoway) and write its coefficient table",
        "select": "Run the model selection tests",
        "fundamentals": "Two-way fixed effects fundamentals, divergence and yearly statistics",
        "report": "Full chain: selection, coefficients, fundamentals and divergence reports",
    }
    for name, text in helps.items():
        commands.add_parser(name, parents=[common, analysis], help=text, description=text)

    simulate = commands.add_parser("simulate", parents=[common], help="Write a synthetic panel and its truth")
    simulate.add_argument("--config", type=Path, default=None, help="key=value generator settings file")
    simulate.add_argument("--preset", choices=["reference"], default=None, help="Start from preset magnitudes")
    simulate.add_argument("--seed", type=int, default=None)
    simulate.add_argument("--entities", type=int, default=None)
    simulate.add_argument("--periods", type=int, default=None)
    simulate.add_argument("--missing-rate", type=float, default=None)
    simulate.add_argument("--currency", default=None)
    return parser


def synthetic_config(args: argparse.Namespace) -> SyntheticConfig:
    values: Dict[str, Any] = {}
    if args.config is not None:
        if not args.config.is_file():
            raise InvalidArgumentsError(f"generator settings file {args.config} not found")
        values.update(SyntheticConfig.read_values(args.config))
    flags = {
        "seed": args.seed,
        "n_entities": args.entities,
        "n_periods": args.periods,
        "missing_rate": args.missing_rate,
        "currency_code": args.currency,
    }
    values.update({key: value for key, value in flags.items() if value is not None})
    if args.preset == "reference":
        return SyntheticConfig.reference_preset(**values)
    return SyntheticConfig(**values)


def build_config(args: argparse.Namespace) -> PipelineConfig:
    if args.command == "simulate":
        return PipelineConfig(out_dir=args.out_dir, synthetic=synthetic_config(args))
    return PipelineConfig(
        input_path=args.input,
        out_dir=args.out_dir,
        model=args.model,
        robust=CovarianceMethod(args.robust.replace("-", "_")),
        alpha=args.alpha,
        bin_width=args.bin_width,
        years=args.years,
        currency_code=args.currency,
        max_workers=args.max_workers,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except InvalidArgumentsError as exc:
        setup_logger(LOG_LEVEL)
        logger.error(exc.detail)
        return exc.exit_code

    setup_logger(args.log_level or LOG_LEVEL, LOG_FILE, LOG_JSON)
    try:
        config = build_config(args)
    except ValidationError as exc:
        logger.error("Invalid options: {}", "; ".join(
            f"{'.'.join(str(part) for part in error['loc'])}: {error['msg']}" for error in exc.errors()
        ))
        return EXIT_USAGE
    except ShareValueError as exc:
        logger.error(exc.detail)
        return exc.exit_code

    try:
        result = run_pipeline(config, args.command)
    except ShareValueError as exc:
        logger.error("{} failed: {}", args.command, exc.detail)
        return exc.exit_code
    except OSError as exc:
        logger.error("{} failed writing output: {}", args.command, exc)
        return EXIT_FAILURE

    for path in result.paths:
        logger.debug("wrote {}", path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
