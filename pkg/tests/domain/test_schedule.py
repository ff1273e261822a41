from __future__ import annotations

import math

import pytest

from spinmem.domain import (
    CouplingMode,
    FocusRule,
    RotationSpec,
    ScheduleInfeasibleError,
    ScheduleSpec,
    SegmentTemplate,
    build_schedule,
    swap_time,
)
from spinmem.domain.schedule import SEGMENT_LABELS


def test_spectator_protocol_is_t_2t_t(params):
    spec = ScheduleSpec(include_swaps=False)
    schedule = build_schedule(40.0, params, spec)
    assert schedule.durations == pytest.approx((0.0, 10.0, 0.0, 20.0, 0.0, 10.0, 0.0))
    assert schedule.t_swap == 0.0


def test_symmetric_rule_refocuses(params):
    schedule = build_schedule(20.0, params, ScheduleSpec(), t_focus=0.3)
    durations = schedule.durations
    assert math.fsum(durations) == pytest.approx(20.0, abs=1e-12)
    assert durations[1] == pytest.approx(durations[5])
    assert durations[0] == pytest.approx(swap_time(params, 0.0))
    assert schedule.focus_residual() == pytest.approx(0.0, abs=1e-9)
    assert [s.label for s in schedule.segments] == list(SEGMENT_LABELS)


def test_reverse_aware_rule_uses_both_focus_times(params):
    schedule = build_schedule(
        20.0, params, ScheduleSpec(), FocusRule.REVERSE_AWARE, t_focus=0.3, t_focus_rev=0.4
    )
    assert schedule.focus_sum() == pytest.approx(0.7)
    assert schedule.focus_residual() == pytest.approx(0.0, abs=1e-9)
    assert schedule.t_swap_rev == pytest.approx(swap_time(params, 0.0, reverse=True))


def test_reverse_aware_rule_needs_reverse_focus(params):
    with pytest.raises(ScheduleInfeasibleError):
        build_schedule(20.0, params, ScheduleSpec(), FocusRule.REVERSE_AWARE, t_focus=0.3)


def test_pulse_durations_are_kept(params):
    pulse = SegmentTemplate(
        kappa=1.0,
        coupling_mode=CouplingMode.HARD_DECOUPLED,
        drive=RotationSpec.about_y(),
        duration=0.5,
    )
    spec = ScheduleSpec(first_pulse=pulse, second_pulse=pulse)
    schedule = build_schedule(20.0, params, spec, t_focus=0.3)
    assert schedule.durations[2] == pytest.approx(0.5)
    assert schedule.durations[4] == pytest.approx(0.5)
    assert isinstance(schedule.segments[2].drive, RotationSpec)
    assert math.fsum(schedule.durations) == pytest.approx(20.0, abs=1e-12)


def test_too_short_memory_time_is_infeasible(params):
    with pytest.raises(ScheduleInfeasibleError, match="too short"):
        build_schedule(1.0, params, ScheduleSpec(), t_focus=0.3)


def test_non_positive_memory_time_rejected(params):
    with pytest.raises(ScheduleInfeasibleError):
        build_schedule(0.0, params, ScheduleSpec())
