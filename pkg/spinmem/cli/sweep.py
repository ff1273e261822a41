from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Generic, TypeVar

from spinmem.cli.schemas import ScenarioConfig
from spinmem.common.config import get_settings
from spinmem.common.logging import setup_logging

logger = logging.getLogger(__name__)

T = TypeVar("T")

__all__ = ["SweepPoint", "run_sweep"]


@dataclass(frozen=True)
class SweepPoint(Generic[T]):
    index: int
    value: float | None
    result: T


def _init_worker(level: str, fmt: str) -> None:
    setup_logging(level, fmt)


def run_sweep(
    evaluate: Callable[[ScenarioConfig], T],
    config: ScenarioConfig,
    *,
    workers: int = 1,
) -> list[SweepPoint[T]]:
    """Evaluate every sweep point; results come back in sweep order.

    ``evaluate`` must be a module-level function so it can be sent to worker
    processes. Each point is independent, so the worker count never changes
    the results.
    """
    points = config.sweep_points()
    configs = [point for _, _, point in points]
    workers = max(1, min(workers, len(points)))
    logger.info(
        "[event=sweep_start]",
        extra={
            "extra": {
                "scenario": config.scenario,
                "parameter": config.sweep.parameter,
                "points": len(points),
                "workers": workers,
            }
        },
    )
    if workers == 1:
        results = [evaluate(point) for point in configs]
    else:
        settings = get_settings()
        with ProcessPoolExecutor(
            max_workers=workers,
            initializer=_init_worker,
            initargs=(settings.LOG_LEVEL, settings.LOG_FORMAT),
        ) as pool:
            # map 按提交顺序返回，与完成顺序无关
            results = list(pool.map(evaluate, configs))
    return [
        SweepPoint(index=index, value=value, result=result)
        for (index, value, _), result in zip(points, results)
    ]
