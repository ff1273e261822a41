from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from spinmem.domain import (
    CavitySegment,
    DriveSpec,
    FocusRule,
    FrequencyGrid,
    LinearState,
    NoiseObservables,
    PhysicalParams,
    ProtocolSchedule,
    RotationSpec,
    ScheduleSpec,
    SystemState,
    build_schedule,
    swap_time,
)
from spinmem.infra.integrator import IntegratorSettings
from spinmem.infra.observability.metrics import PROTOCOL_RUNS, SEGMENTS
from spinmem.services.base import (
    DegenerateFitError,
    ProtocolSegmentError,
    SimulationError,
)
from spinmem.services.io_map import (
    AXIS_MISMATCH_LIMIT,
    RunResult,
    axis_mismatch,
    fit_io_map,
    principal_variances,
    quadratures,
    qubit_fidelity,
)
from spinmem.services.linear_dynamics import evolve_linear, focus_time, phase_profile
from spinmem.services.moment_dynamics import (
    DEFAULT_MEMORY_BUDGET,
    DEFAULT_PSD_TOLERANCE,
    MomentTrajectory,
    check_memory_budget,
    evolve_moments,
    noise_observables,
)
from spinmem.services.pulses import apply_rotation, cavity_drive

logger = logging.getLogger(__name__)

# 单一频率类没有相位分布可拟合时，采用 T_focus ≈ (2/3)·T_swap
CRUDE_FOCUS_RATIO = 2.0 / 3.0
# 线性检查：两次运行的输出协方差相对差异上限
LINEARITY_TOLERANCE = 0.01
BATTERY_SIZE = 8

__all__ = [
    "BatteryRun",
    "ProtocolRun",
    "ProtocolSettings",
    "ProtocolTrace",
    "analyze_battery",
    "battery_amplitudes",
    "plan_protocol",
    "run_battery",
    "run_protocol",
    "swap_focus_time",
]


@dataclass(frozen=True, slots=True)
class ProtocolSettings:
    integrator: IntegratorSettings = field(default_factory=IntegratorSettings)
    samples_per_segment: int = 40
    psd_tolerance: float = DEFAULT_PSD_TOLERANCE
    with_covariance: bool = True
    memory_budget: float = DEFAULT_MEMORY_BUDGET
    """Bytes a covariance run may hold at its peak."""

    def __post_init__(self) -> None:
        if self.samples_per_segment < 1:
            raise ValueError("samples_per_segment must be >= 1")
        if self.memory_budget <= 0:
            raise ValueError("memory_budget must be positive")


def swap_focus_time(
    params: PhysicalParams,
    grid: FrequencyGrid,
    segment: CavitySegment,
    *,
    reverse: bool = False,
    settings: IntegratorSettings | None = None,
) -> float:
    """Fit T_focus (or T_focus^rev) from a simulated swap of duration ``segment.duration``."""
    if grid.is_homogeneous:
        return CRUDE_FOCUS_RATIO * segment.duration
    trajectory = evolve_linear(
        LinearState.cavity_input(grid, 1.0),
        segment,
        grid,
        params,
        reverse_rates=reverse,
        settings=settings,
    )
    profile = phase_profile(trajectory.final, grid)
    return focus_time(profile, t_swap=segment.duration)


def plan_protocol(
    t_mem: float,
    params: PhysicalParams,
    grid: FrequencyGrid,
    spec: ScheduleSpec,
    rule: FocusRule = FocusRule.SYMMETRIC,
    *,
    settings: IntegratorSettings | None = None,
) -> ProtocolSchedule:
    """Simulate the swaps, fit the focus times and solve the seven durations."""
    if not spec.include_swaps:
        return build_schedule(t_mem, params, spec, rule)
    t_swap = swap_time(params, spec.swap.kappa)
    t_focus = swap_focus_time(
        params, grid, spec.swap.build(t_swap, "storage"), settings=settings
    )
    t_focus_rev = None
    if rule is FocusRule.REVERSE_AWARE:
        t_swap_rev = swap_time(params, spec.swap.kappa, reverse=True)
        t_focus_rev = swap_focus_time(
            params,
            grid,
            spec.swap.build(t_swap_rev, "retrieval"),
            reverse=True,
            settings=settings,
        )
    schedule = build_schedule(
        t_mem, params, spec, rule, t_focus=t_focus, t_focus_rev=t_focus_rev
    )
    logger.info(
        "[event=protocol_planned]",
        extra={
            "extra": {
                "rule": rule.value,
                "t_mem": t_mem,
                "t_swap": t_swap,
                "t_focus": t_focus,
                "t_focus_rev": t_focus_rev,
                "durations": list(schedule.durations),
            }
        },
    )
    return schedule


@dataclass(frozen=True, eq=False)
class ProtocolTrace:
    """Time series sampled along a protocol run (absolute times)."""

    times: NDArray[np.float64]
    segment_index: NDArray[np.int64]
    a_c: NDArray[np.complex128]
    b: NDArray[np.complex128]
    excitation: NDArray[np.float64]
    observables: tuple[NoiseObservables, ...]

    def observable_at(self, time: float) -> NoiseObservables:
        """Sample closest to ``time``."""
        if not self.observables:
            raise ValueError("run carried no covariance")
        k = int(np.argmin(np.abs(self.times - time)))
        return self.observables[k]

    def records(self) -> list[tuple[float, ...]]:
        """Rows ``(t, segment, Re a_c, Im a_c, Re b, Im b, p_exc, resn, ren)``."""
        rows = []
        for k, t in enumerate(self.times):
            obs = self.observables[k] if self.observables else None
            rows.append(
                (
                    float(t),
                    int(self.segment_index[k]),
                    float(self.a_c[k].real),
                    float(self.a_c[k].imag),
                    float(self.b[k].real),
                    float(self.b[k].imag),
                    float(self.excitation[k]),
                    math.nan if obs is None else obs.resn,
                    math.nan if obs is None else obs.ren,
                )
            )
        return rows


@dataclass(frozen=True, eq=False)
class ProtocolRun:
    schedule: ProtocolSchedule
    initial: SystemState
    final: SystemState
    boundaries: tuple[SystemState, ...]
    """State at the end of every segment."""
    trace: ProtocolTrace

    @property
    def output(self) -> complex:
        return self.final.a_c


class _TraceBuilder:
    def __init__(self, grid: FrequencyGrid, params: PhysicalParams) -> None:
        self.grid = grid
        self.params = params
        self.times: list[NDArray[np.float64]] = []
        self.index: list[NDArray[np.int64]] = []
        self.a_c: list[NDArray[np.complex128]] = []
        self.b: list[NDArray[np.complex128]] = []
        self.excitation: list[NDArray[np.float64]] = []
        self.observables: list[NoiseObservables] = []

    def add(self, segment_index: int, trajectory: MomentTrajectory) -> None:
        # 末尾样本与下一段起点重合，只保留一次
        keep = slice(None, -1) if trajectory.times.size > 1 else slice(None)
        times = trajectory.times[keep]
        self.times.append(times)
        self.index.append(np.full(times.size, segment_index, dtype=np.int64))
        self.a_c.append(trajectory.a_c[keep])
        self.b.append(trajectory.collective(self.grid, self.params)[keep])
        self.excitation.append(trajectory.excitation(self.grid)[keep])
        self.observables.extend(trajectory.observables[keep])

    def add_state(self, segment_index: int, state: SystemState) -> None:
        self.times.append(np.array([state.time]))
        self.index.append(np.array([segment_index], dtype=np.int64))
        self.a_c.append(np.array([state.a_c]))
        self.b.append(np.array([state.collective(self.grid, self.params)]))
        self.excitation.append(np.array([state.excitation(self.grid)]))
        if state.cov is not None:
            self.observables.append(noise_observables(state, self.grid, self.params))

    def build(self) -> ProtocolTrace:
        return ProtocolTrace(
            times=np.concatenate(self.times),
            segment_index=np.concatenate(self.index),
            a_c=np.concatenate(self.a_c),
            b=np.concatenate(self.b),
            excitation=np.concatenate(self.excitation),
            observables=tuple(self.observables),
        )


def _sample_times(
    duration: float, count: int, start: float, checkpoints: Sequence[float]
) -> NDArray[np.float64]:
    grid = np.linspace(0.0, duration, count, endpoint=False)
    local = [t - start for t in checkpoints if start <= t < start + duration]
    return np.unique(np.concatenate([grid, np.asarray(local, dtype=np.float64)]))


def _drive_kind(segment: CavitySegment) -> str:
    if isinstance(segment.drive, RotationSpec):
        return "rotation"
    if isinstance(segment.drive, DriveSpec):
        return "sech"
    return "none"


def _run_segment(
    state: SystemState,
    segment: CavitySegment,
    index: int,
    grid: FrequencyGrid,
    params: PhysicalParams,
    settings: ProtocolSettings,
    checkpoints: Sequence[float],
    trace: _TraceBuilder,
) -> SystemState:
    def evolve(current: SystemState, part: CavitySegment) -> SystemState:
        if part.duration == 0 and part.drive is None:
            return current
        drive = cavity_drive(part, current, grid, params, settings=settings.integrator)
        trajectory = evolve_moments(
            current,
            part,
            grid,
            params,
            drive=drive,
            t_eval=_sample_times(
                part.duration, settings.samples_per_segment, current.time, checkpoints
            ),
            settings=settings.integrator,
            psd_tolerance=settings.psd_tolerance,
            memory_budget=settings.memory_budget,
        )
        trace.add(index, trajectory)
        return trajectory.final

    if isinstance(segment.drive, RotationSpec):
        # 有限时长的转动段：在中点瞬时转动
        half = segment.duration / 2
        if half > 0:
            state = evolve(state, segment.with_duration(half))
        state = apply_rotation(state, segment.drive)
        if half > 0:
            state = evolve(state, segment.with_duration(segment.duration - half))
        return state
    return evolve(state, segment)


def run_protocol(
    schedule: ProtocolSchedule,
    grid: FrequencyGrid,
    params: PhysicalParams,
    alpha: complex = 0j,
    *,
    initial: SystemState | None = None,
    settings: ProtocolSettings | None = None,
    checkpoints: Sequence[float] = (),
) -> ProtocolRun:
    """Execute the seven segments in order from a coherent cavity input.

    ``initial`` replaces the default start (ground-state spins, cavity
    amplitude ``alpha`` with vacuum noise). ``checkpoints`` are absolute
    times added to the sampled trace.
    """
    settings = settings or ProtocolSettings()
    if settings.with_covariance or (initial is not None and initial.cov is not None):
        check_memory_budget(
            grid.size, settings.memory_budget, method=settings.integrator.method
        )
    if initial is None:
        initial = SystemState.ground(grid, alpha, with_covariance=settings.with_covariance)
    state = initial
    trace = _TraceBuilder(grid, params)
    boundaries: list[SystemState] = []
    for index, segment in enumerate(schedule.segments):
        try:
            state = _run_segment(
                state, segment, index, grid, params, settings, checkpoints, trace
            )
        except SimulationError as exc:
            PROTOCOL_RUNS.labels(outcome="failed").inc()
            logger.error(
                "[event=segment_failed]",
                extra={
                    "extra": {"segment": index, "label": segment.label, "error": str(exc)}
                },
            )
            raise ProtocolSegmentError(index, segment.label, exc) from exc
        SEGMENTS.labels(
            coupling=segment.coupling_mode.value, drive=_drive_kind(segment)
        ).inc()
        boundaries.append(state)
    trace.add_state(len(schedule.segments) - 1, state)
    PROTOCOL_RUNS.labels(outcome="ok").inc()
    logger.debug(
        "[event=protocol_run_done]",
        extra={
            "extra": {
                "alpha": alpha,
                "output": state.a_c,
                "excitation": state.excitation(grid),
            }
        },
    )
    return ProtocolRun(
        schedule=schedule,
        initial=initial,
        final=state,
        boundaries=tuple(boundaries),
        trace=trace.build(),
    )


def battery_amplitudes(magnitude: float = 1.0, count: int = BATTERY_SIZE) -> list[complex]:
    """``count`` inputs of equal magnitude spaced evenly in phase."""
    phases = 2.0 * math.pi * np.arange(count) / count
    return [magnitude * complex(math.cos(p), math.sin(p)) for p in phases]


@dataclass(frozen=True, eq=False)
class BatteryRun:
    amplitudes: tuple[complex, ...]
    outputs: tuple[complex, ...]
    vacuum: ProtocolRun
    probe: ProtocolRun | None = None
    """Driven run with covariance used by the linearity check."""
    diagnostics: tuple[str, ...] = ()

    @property
    def offset(self) -> complex:
        return self.vacuum.final.a_c

    def pairs(self) -> list[tuple[tuple[float, float], tuple[float, float]]]:
        """Input and vacuum-subtracted output quadratures."""
        return [
            (quadratures(a), quadratures(out - self.offset))
            for a, out in zip(self.amplitudes, self.outputs)
        ]


def run_battery(
    schedule: ProtocolSchedule,
    grid: FrequencyGrid,
    params: PhysicalParams,
    amplitudes: Sequence[complex] | None = None,
    *,
    settings: ProtocolSettings | None = None,
    linearity_check: bool = True,
) -> BatteryRun:
    """One means-only run per amplitude plus a vacuum run carrying the covariance."""
    settings = settings or ProtocolSettings()
    if amplitudes is None:
        amplitudes = battery_amplitudes()
    inputs = tuple(complex(a) for a in amplitudes)
    if all(a == 0 for a in inputs):
        raise DegenerateFitError("battery needs at least one non-zero amplitude")

    vacuum = run_protocol(schedule, grid, params, 0j, settings=_with_covariance(settings, True))
    means_only = _with_covariance(settings, False)
    outputs = tuple(
        run_protocol(schedule, grid, params, a, settings=means_only).output for a in inputs
    )

    diagnostics: list[str] = []
    driven: ProtocolRun | None = None
    if linearity_check:
        probe_amplitude = next(a for a in inputs if a != 0)
        driven = run_protocol(
            schedule, grid, params, probe_amplitude, settings=_with_covariance(settings, True)
        )
        reference = vacuum.final.cavity_covariance
        change = float(
            np.linalg.norm(driven.final.cavity_covariance - reference)
            / np.linalg.norm(reference)
        )
        if change > LINEARITY_TOLERANCE:
            message = f"output covariance depends on the input ({change:.2%} change)"
            diagnostics.append(message)
            logger.warning(
                "[event=battery_nonlinear] " + message,
                extra={"extra": {"relative_change": change, "probe": probe_amplitude}},
            )
    return BatteryRun(
        amplitudes=inputs,
        outputs=outputs,
        vacuum=vacuum,
        probe=driven,
        diagnostics=tuple(diagnostics),
    )


def _with_covariance(settings: ProtocolSettings, enabled: bool) -> ProtocolSettings:
    return ProtocolSettings(
        integrator=settings.integrator,
        samples_per_segment=settings.samples_per_segment,
        psd_tolerance=settings.psd_tolerance,
        with_covariance=enabled,
        memory_budget=settings.memory_budget,
    )


def analyze_battery(battery: BatteryRun, grid: FrequencyGrid) -> RunResult:
    """Fit the gain map and read the variances along its axes."""
    gain_map = fit_io_map(battery.pairs())
    cov = battery.vacuum.final.cavity_covariance
    sigma1_sq, sigma2_sq = principal_variances(cov, gain_map)
    diagnostics = list(battery.diagnostics)
    mismatch = axis_mismatch(cov, gain_map)
    if mismatch > AXIS_MISMATCH_LIMIT:
        message = f"covariance axes differ from gain axes by {math.degrees(mismatch):.2f} deg"
        diagnostics.append(message)
        logger.warning(
            "[event=axis_mismatch] " + message,
            extra={"extra": {"mismatch_deg": math.degrees(mismatch)}},
        )
    return RunResult(
        gain_map=gain_map,
        sigma1_sq=sigma1_sq,
        sigma2_sq=sigma2_sq,
        p_exc_end=battery.vacuum.final.excitation(grid),
        f_q=qubit_fidelity(gain_map, sigma1_sq, sigma2_sq),
        resn_series=battery.vacuum.trace.observables,
        diagnostics=tuple(diagnostics),
    )
