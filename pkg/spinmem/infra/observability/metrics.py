from __future__ import annotations

from pathlib import Path

from prometheus_client import REGISTRY, Counter, Histogram, write_to_textfile

# 低基数标签：仅使用模型名/耦合模式/驱动类型，禁止把参数值写进标签
SEGMENTS = Counter(
    "spinmem_segments_total",
    "Protocol segments executed",
    ["coupling", "drive"],
)

RHS_EVALUATIONS = Counter(
    "spinmem_rhs_evaluations_total",
    "Right-hand-side evaluations spent by the ODE solver",
    ["model"],
)

SOLVER_STEPS = Counter(
    "spinmem_solver_steps_total",
    "Accepted adaptive solver steps",
    ["model"],
)

SEGMENT_DURATION = Histogram(
    "spinmem_segment_duration_seconds",
    "Wall-clock time spent integrating one segment",
    ["model"],
    buckets=(0.001, 0.01, 0.1, 0.5, 1.0, 5.0, 30.0, 120.0, 600.0),
)

PROTOCOL_RUNS = Counter(
    "spinmem_protocol_runs_total",
    "Protocol runs by outcome",
    ["outcome"],
)


def observe_integration(model: str, steps: int, evaluations: int, seconds: float) -> None:
    SOLVER_STEPS.labels(model=model).inc(steps)
    RHS_EVALUATIONS.labels(model=model).inc(evaluations)
    SEGMENT_DURATION.labels(model=model).observe(seconds)


def write_metrics(path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    write_to_textfile(str(path), REGISTRY)
