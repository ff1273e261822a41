"""``simulate <scenario> --config FILE``: run one scenario and write its tables.

Exit codes:
  0  success (validate always exits 0 and reports in the summary)
  2  bad config or parameters
  3  no feasible protocol schedule
  4  numerical failure
"""

from __future__ import annotations

import argparse
import logging
import time
from pathlib import Path
from typing import Sequence

from spinmem import __version__
from spinmem.cli.scenarios import run_scenario, write_outputs
from spinmem.cli.schemas import SCENARIOS, ConfigError, load_config
from spinmem.common.config import get_settings
from spinmem.common.logging import STARTUP_LOGGER, setup_logging
from spinmem.domain import DomainError, OverdampedSwapError, ScheduleInfeasibleError
from spinmem.infra.observability.metrics import write_metrics
from spinmem.services import MemoryBudgetError, SimulationError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SCHEDULE = 3
EXIT_NUMERICAL = 4

__all__ = ["build_parser", "main"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simulate",
        description="Spin-ensemble memory protocol simulator",
    )
    parser.add_argument("scenario", choices=SCENARIOS)
    parser.add_argument("--config", type=Path, required=True, help="TOML scenario file")
    parser.add_argument(
        "--out",
        type=Path,
        default=None,
        help="Output directory (default: output.directory from the config)",
    )
    parser.add_argument(
        "--workers",
        type=int,
        default=None,
        help="Sweep worker processes (default: SPINMEM_WORKERS)",
    )
    parser.add_argument(
        "--metrics-file",
        type=Path,
        default=None,
        help="Write Prometheus text-format metrics here after the run",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return parser


def _exit_code(exc: Exception) -> int:
    # 调度不可行是 DomainError 的子类，需先判断
    if isinstance(exc, (ScheduleInfeasibleError, OverdampedSwapError)):
        return EXIT_SCHEDULE
    if isinstance(exc, (ConfigError, DomainError, MemoryBudgetError)):
        return EXIT_CONFIG
    return EXIT_NUMERICAL


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = get_settings()
    except ValueError as exc:
        setup_logging()
        logger.error("[event=settings_invalid]", extra={"extra": {"error": str(exc)}})
        return EXIT_CONFIG
    setup_logging(settings.LOG_LEVEL, settings.LOG_FORMAT)
    workers = settings.WORKERS if args.workers is None else args.workers
    if workers < 1:
        logger.error("[event=settings_invalid]", extra={"extra": {"error": "workers < 1"}})
        return EXIT_CONFIG
    logging.getLogger(STARTUP_LOGGER).info(
        "spinmem %s: scenario=%s config=%s workers=%d",
        __version__,
        args.scenario,
        args.config,
        workers,
    )

    started = time.perf_counter()
    try:
        config = load_config(args.config).with_scenario(args.scenario)
        output = run_scenario(config, workers=workers)
        directory = args.out if args.out is not None else config.output.directory
        written = write_outputs(config, output, directory)
    except (ConfigError, DomainError, SimulationError) as exc:
        code = _exit_code(exc)
        logger.error(
            "[event=scenario_failed]",
            extra={
                "extra": {
                    "scenario": args.scenario,
                    "exit_code": code,
                    "error_type": type(exc).__name__,
                    "error": str(exc),
                }
            },
        )
        return code
    finally:
        if args.metrics_file is not None and settings.ENABLE_METRICS:
            write_metrics(args.metrics_file)

    logger.info(
        "[event=scenario_written]",
        extra={
            "extra": {
                "scenario": config.name,
                "files": [p.as_posix() for p in (*written.tables, written.summary)],
                "elapsed_s": round(time.perf_counter() - started, 3),
            }
        },
    )
    return EXIT_OK
