from __future__ import annotations

import math

import numpy as np
import pytest

from spinmem.domain import PhysicalParams, SystemState, auto_d_delta, build_frequency_grid
from spinmem.services.validation import (
    convergence_scan,
    detect_revival,
    free_induction,
    is_monotone_decreasing,
    psd_summary,
    revival_baseline,
)


def test_monotone_decreasing():
    assert is_monotone_decreasing([0.3, 0.1, 0.05])
    assert not is_monotone_decreasing([0.3, 0.3, 0.05])
    assert is_monotone_decreasing([])


class TestRevival:
    def test_coarse_grid_revives_at_two_pi_over_spacing(self, params):
        grid = build_frequency_grid(params, 10.0, 0.2)
        times = np.linspace(0.0, 1.2 * grid.revival_time, 2401)
        report = detect_revival(times, free_induction(grid, params, times), grid, params)
        assert report.detected
        assert report.time == pytest.approx(2 * math.pi / 0.2, rel=0.02)
        assert report.expected_time == pytest.approx(grid.revival_time)

    def test_compliant_grid_shows_none(self, params):
        t_mem = 20.0
        grid = build_frequency_grid(params, 10.0, auto_d_delta(t_mem))
        times = np.linspace(0.0, t_mem, 801)
        report = detect_revival(times, free_induction(grid, params, times), grid, params)
        assert not report.detected
        assert report.time is None

    def test_baseline_is_infinite_at_origin(self, params):
        grid = build_frequency_grid(params, 10.0, 0.2)
        baseline = revival_baseline(np.array([0.0, 1.0]), grid, params)
        assert baseline[0] == math.inf
        assert baseline[1] > math.exp(-params.gamma)


def test_free_induction_starts_at_one(params, small_grid):
    b = free_induction(small_grid, params, np.array([0.0, 1.0]))
    assert b[0] == pytest.approx(1.0)
    assert abs(b[1]) < 1.0


def test_psd_summary_skips_means_only_states(small_grid):
    states = [
        SystemState.ground(small_grid),
        SystemState.ground(small_grid, with_covariance=False),
    ]
    summary = psd_summary(states)
    assert summary.checked == 1
    # 纵向方差为零，最小本征值为零
    assert summary.min_eigenvalue == pytest.approx(0.0, abs=1e-3)
    assert summary.time == 0.0


def test_convergence_scan_reports_each_cut():
    weak = PhysicalParams.from_ensemble_coupling(0.2, n_spins=1e12)
    points = convergence_scan(weak, 0.5, cuts=(5.0, 10.0), samples=11)
    assert [p.cut_over_gamma for p in points] == [5.0, 10.0]
    assert points[0].classes < points[1].classes
    assert all(p.variance_error is None for p in points)
    assert all(0.0 <= p.mean_error < 0.5 for p in points)
