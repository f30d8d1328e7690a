"""Main entry point for the EIN-LDG experiment runner."""
import sys
import argparse
from typing import Optional

from loguru import logger
from pydantic import ValidationError

from config import config, load_run_config
from errors import ConfigurationError, EinLdgError, SolverBlowupError, SteadyStateNotReachedError
from experiments import ExperimentRunner

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_BLOWUP = 2
EXIT_INTERNAL = 3

DEFAULT_EXPERIMENT = {
    "convergence": "example1-const-half",
    "stability": "example1-const-half",
    "pme": "barenblatt",
    "highfield": "highfield",
    "selftest": "selftest",
}


def setup_logging(level: str = "INFO", logs_dir=None):
    """Setup logging configuration."""
    logger.remove()  # Remove default handler

    # Console logging
    logger.add(
        sys.stderr,
        format="<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | <level>{message}</level>",
        level=level,
    )

    # File logging
    logs_dir = logs_dir or config.logs_dir
    logs_dir.mkdir(parents=True, exist_ok=True)
    logger.add(
        logs_dir / "einldg_{time}.log",
        rotation="1 day",
        retention="30 days",
        level="DEBUG",
        format="{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function}:{line} - {message}",
    )

    logger.debug("Logging initialized")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="einldg", description="EIN-LDG nonlinear diffusion experiments")
    parser.add_argument(
        "command",
        choices=list(DEFAULT_EXPERIMENT),
        help="Experiment family to run",
    )
    parser.add_argument("--config", help="key=value run configuration file")
    parser.add_argument("--experiment", help="Problem name (e.g. example1-quadratic, two-box-equal)")
    parser.add_argument("--cells", help="Comma-separated mesh sizes")
    parser.add_argument("--dt", type=float, help="Fixed time step (overrides dt_factor * h)")
    parser.add_argument("--a0", type=float, help="Fixed a0 (adaptive when omitted)")
    parser.add_argument("--a0-values", dest="a0_values", help="Comma-separated a0 values for the stability scan")
    parser.add_argument("--out", dest="output_dir", help="Output directory")
    parser.add_argument("--degree", type=int, help="Polynomial degree k")
    parser.add_argument("--order", type=int, help="IMEX order (1, 2 or 3)")
    parser.add_argument("--final-time", dest="final_time", type=float, help="Final time")
    parser.add_argument("--workers", type=int, help="Parallel table rows")
    parser.add_argument(
        "--explicit-reference",
        dest="explicit_reference",
        action="store_true",
        default=None,
        help="Also run the explicit SSP-RK3 reference (highfield)",
    )
    parser.add_argument("--debug", action="store_true", help="Enable debug logging")
    return parser


def run(command: str, overrides: dict, config_path: Optional[str] = None) -> int:
    """Run one subcommand and map its outcome to an exit code."""
    try:
        cfg = load_run_config(config_path, overrides, defaults={"experiment": DEFAULT_EXPERIMENT[command]})
        runner = ExperimentRunner(cfg)

        if command == "convergence":
            runner.run_convergence()
            if runner.unexpected_blowups:
                for failure in runner.unexpected_blowups:
                    logger.error(f"Blowup in a run expected to be stable: {failure}")
                return EXIT_BLOWUP
        elif command == "stability":
            runner.run_stability_scan()
        elif command == "pme":
            runner.run_pme()
        elif command == "highfield":
            runner.run_highfield()
        elif command == "selftest":
            results = runner.run_selftest()
            failed = [r.name for r in results if not r.passed]
            if failed:
                logger.error(f"{len(failed)} self-test checks failed: {', '.join(failed)}")
                return EXIT_INTERNAL
        return EXIT_OK

    except (ConfigurationError, ValidationError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except (SolverBlowupError, SteadyStateNotReachedError) as e:
        logger.error(f"Run failed: {e}")
        return EXIT_BLOWUP
    except (AssertionError, EinLdgError) as e:
        logger.exception(f"Internal error: {e}")
        return EXIT_INTERNAL


def main():
    """Main application entry point."""
    args = build_parser().parse_args()

    setup_logging("DEBUG" if args.debug else config.log_level, config.logs_dir)
    logger.info(f"einldg - command: {args.command}")

    overrides = {
        key: getattr(args, key)
        for key in (
            "experiment",
            "cells",
            "dt",
            "a0",
            "a0_values",
            "output_dir",
            "degree",
            "order",
            "final_time",
            "workers",
            "explicit_reference",
        )
    }
    sys.exit(run(args.command, overrides, args.config))


if __name__ == "__main__":
    main()
