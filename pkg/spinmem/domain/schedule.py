from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from spinmem.domain.errors import ScheduleInfeasibleError
from spinmem.domain.params import PhysicalParams
from spinmem.domain.segments import CavitySegment, CouplingMode, Drive
from spinmem.domain.swap import swap_time

SEGMENT_LABELS = (
    "storage",
    "storage_wait",
    "first_pulse",
    "inverted_wait",
    "second_pulse",
    "retrieval_wait",
    "retrieval",
)

_RULE_TOLERANCE = 1e-9


class FocusRule(str, Enum):
    SYMMETRIC = "symmetric"
    REVERSE_AWARE = "reverse-aware"


@dataclass(frozen=True, slots=True)
class SegmentTemplate:
    """Cavity settings of one segment; ``duration`` is only set for pulses."""

    kappa: float = 0.0
    delta_cs: float = 0.0
    coupling_mode: CouplingMode = CouplingMode.COUPLED
    drive: Drive | None = None
    duration: float = 0.0

    def build(self, duration: float, label: str) -> CavitySegment:
        return CavitySegment(
            kappa=self.kappa,
            delta_cs=self.delta_cs,
            duration=duration,
            coupling_mode=self.coupling_mode,
            drive=self.drive,
            label=label,
        )


_HARD = SegmentTemplate(coupling_mode=CouplingMode.HARD_DECOUPLED)


@dataclass(frozen=True, slots=True)
class ScheduleSpec:
    """Segment settings of the seven-part protocol before timing is solved."""

    swap: SegmentTemplate = field(default_factory=SegmentTemplate)
    storage_wait: SegmentTemplate = _HARD
    first_pulse: SegmentTemplate = _HARD
    inverted_wait: SegmentTemplate = _HARD
    second_pulse: SegmentTemplate = _HARD
    retrieval_wait: SegmentTemplate = _HARD
    include_swaps: bool = True


@dataclass(frozen=True)
class ProtocolSchedule:
    segments: tuple[CavitySegment, ...]
    t_mem: float
    rule: FocusRule
    t_swap: float
    t_swap_rev: float | None
    t_focus: float
    t_focus_rev: float | None

    def __post_init__(self) -> None:
        if len(self.segments) != 7:
            raise ScheduleInfeasibleError("a protocol schedule has exactly 7 segments")
        total = math.fsum(s.duration for s in self.segments)
        if abs(total - self.t_mem) > _RULE_TOLERANCE * max(self.t_mem, 1.0):
            raise ScheduleInfeasibleError(
                f"segment durations sum to {total:.12g}, expected {self.t_mem:.12g}"
            )
        if abs(self.focus_residual()) > _RULE_TOLERANCE * max(self.t_mem, 1.0):
            raise ScheduleInfeasibleError("focusing rule violated")

    @property
    def durations(self) -> tuple[float, ...]:
        return tuple(s.duration for s in self.segments)

    @property
    def boundaries(self) -> tuple[float, ...]:
        edges = [0.0]
        for duration in self.durations:
            edges.append(edges[-1] + duration)
        return tuple(edges)

    def focus_sum(self) -> float:
        if self.rule is FocusRule.REVERSE_AWARE:
            return self.t_focus + (self.t_focus_rev or 0.0)
        return 2.0 * self.t_focus

    def focus_residual(self) -> float:
        """``focus_sum + T2+..+T6 - 2*T4``; zero for a refocused schedule."""
        middle = math.fsum(self.durations[1:6])
        return self.focus_sum() + middle - 2.0 * self.durations[3]


def build_schedule(
    t_mem: float,
    params: PhysicalParams,
    spec: ScheduleSpec,
    rule: FocusRule = FocusRule.SYMMETRIC,
    *,
    t_focus: float = 0.0,
    t_focus_rev: float | None = None,
) -> ProtocolSchedule:
    """Solve T2..T6 so the phases refocus at the start of the retrieval swap.

    Swap durations come from the closed form. Waiting periods obey T2 = T6 and
    the selected focusing rule; pulse segments keep their fixed durations.
    """
    if not t_mem > 0:
        raise ScheduleInfeasibleError("t_mem must be positive")
    reverse_aware = rule is FocusRule.REVERSE_AWARE
    if spec.include_swaps:
        t_swap = swap_time(params, spec.swap.kappa)
        t_swap_rev = swap_time(params, spec.swap.kappa, reverse=True) if reverse_aware else None
        t_retrieval = t_swap_rev if t_swap_rev is not None else t_swap
    else:
        t_swap, t_swap_rev, t_retrieval = 0.0, None, 0.0
        t_focus, t_focus_rev = 0.0, 0.0 if reverse_aware else None

    if reverse_aware and t_focus_rev is None:
        raise ScheduleInfeasibleError("reverse-aware rule needs t_focus_rev")
    focus_sum = t_focus + (t_focus_rev or 0.0) if reverse_aware else 2.0 * t_focus

    pulses = spec.first_pulse.duration + spec.second_pulse.duration
    remaining = t_mem - t_swap - t_retrieval - pulses
    wait = (remaining - focus_sum - pulses) / 4.0
    inverted = focus_sum + 2.0 * wait + pulses
    if wait < 0 or inverted < 0:
        raise ScheduleInfeasibleError(
            f"t_mem={t_mem:.6g} too short: storage/retrieval waits would be {wait:.6g}"
        )

    durations = (
        t_swap,
        wait,
        spec.first_pulse.duration,
        inverted,
        spec.second_pulse.duration,
        wait,
        t_retrieval,
    )
    templates = (
        spec.swap,
        spec.storage_wait,
        spec.first_pulse,
        spec.inverted_wait,
        spec.second_pulse,
        spec.retrieval_wait,
        spec.swap,
    )
    segments = tuple(
        template.build(duration, label)
        for template, duration, label in zip(templates, durations, SEGMENT_LABELS)
    )
    # 吸收舍入误差，保证总时长精确等于 t_mem
    drift = t_mem - math.fsum(durations)
    segments = segments[:3] + (segments[3].with_duration(inverted + drift),) + segments[4:]
    return ProtocolSchedule(
        segments=segments,
        t_mem=t_mem,
        rule=rule,
        t_swap=t_swap,
        t_swap_rev=t_swap_rev,
        t_focus=t_focus,
        t_focus_rev=t_focus_rev,
    )
