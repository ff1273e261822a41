"""Long-running agreement checks between the sampled ensemble and the reduced models.

Run with ``pytest -m slow``.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from spinmem.domain import (
    CavitySegment,
    LinearState,
    PhysicalParams,
    SystemState,
    auto_d_delta,
    build_frequency_grid,
    swap_closed_form,
    swap_time,
)
from spinmem.infra.integrator import IntegratorSettings
from spinmem.services.linear_dynamics import (
    evolve_linear,
    first_zero_crossing,
    two_mode_reduction,
)
from spinmem.services.moment_dynamics import evolve_moments
from spinmem.services.noise_closed_forms import steady_state_noise, transient_variance_closed_form

pytestmark = pytest.mark.slow

N = 1e12
TIGHT = IntegratorSettings(rtol=1e-11, atol=1e-13)


@pytest.mark.parametrize("ratio", [1.0, 2.5, 5.0])
def test_sampled_lorentzian_matches_two_mode_reduction(ratio):
    params = PhysicalParams.from_ensemble_coupling(ratio * 0.5, n_spins=N)
    horizon = 5.0 / params.gamma
    grid = build_frequency_grid(params, 100.0 * params.gamma, auto_d_delta(horizon))
    times = np.linspace(0.0, horizon, 201)
    segment = CavitySegment(kappa=0.0, duration=horizon)
    sampled = evolve_linear(
        LinearState.cavity_input(grid, 1.0), segment, grid, params, t_eval=times
    ).collective(grid, params)
    _, reduced = two_mode_reduction(params, segment).propagate(times, 1.0)
    deviation = np.max(np.abs(sampled - reduced)) / np.max(np.abs(reduced))
    assert deviation < 0.01


def test_swap_matches_closed_form_for_random_parameters():
    rng = np.random.default_rng(20240611)
    for _ in range(10):
        g_ens = rng.uniform(1.0, 3.0)
        kappa = rng.uniform(0.0, 1.0)
        gamma_perp = rng.uniform(0.0, 0.05)
        tau = math.inf if gamma_perp == 0 else 1.0 / gamma_perp
        params = PhysicalParams.from_ensemble_coupling(g_ens, n_spins=N, tau=tau)
        grid = build_frequency_grid(params, 0.0, 0.0)
        t_swap = swap_time(params, kappa)
        times = np.linspace(0.0, 2.0 * t_swap, 101)
        trajectory = evolve_linear(
            LinearState.cavity_input(grid, 1.0),
            CavitySegment(kappa=kappa, duration=2.0 * t_swap),
            grid,
            params,
            t_eval=times,
            dense=True,
            settings=TIGHT,
        )
        a_exact, _ = swap_closed_form(times, 1.0, params, kappa)
        assert np.max(np.abs(trajectory.a_c - a_exact)) < 1e-3 * np.max(np.abs(a_exact))
        assert first_zero_crossing(trajectory) == pytest.approx(t_swap, abs=1e-4 * t_swap)


@pytest.mark.parametrize("cooperativity", [0.1, 0.3, 0.63])
def test_inverted_noise_matches_closed_forms(cooperativity):
    gamma = 0.5
    params = PhysicalParams.from_ensemble_coupling(gamma * math.sqrt(cooperativity), n_spins=N)
    grid = build_frequency_grid(params, 0.0, 0.0)
    kappa = params.gamma
    horizon = 3.0 / params.gamma
    times = np.linspace(0.0, horizon, 31)
    trajectory = evolve_moments(
        SystemState.inverted(grid),
        CavitySegment(kappa=kappa, duration=horizon),
        grid,
        params,
        t_eval=times,
    )
    var_x, var_s = transient_variance_closed_form(trajectory.times, params, kappa)
    assert trajectory.cavity_cov is not None
    assert np.allclose(trajectory.cavity_cov[:, 0, 0], var_x, rtol=0.02)
    total = float(np.sum(grid.populations))
    simulated_s = np.array([total * (obs.resn + 1.0) for obs in trajectory.observables])
    assert np.allclose(simulated_s, var_s, rtol=0.02)

    # 长时间后到达稳态
    long_run = 200.0 / params.gamma
    settled = evolve_moments(
        SystemState.inverted(grid),
        CavitySegment(kappa=kappa, duration=long_run),
        grid,
        params,
        t_eval=np.linspace(0.0, long_run, 41),
    ).final
    steady_x, steady_s = steady_state_noise(params, kappa)
    assert settled.cov is not None
    assert settled.cov[0, 0] == pytest.approx(steady_x, rel=0.01)
    assert settled.cov[2, 2] == pytest.approx(steady_s, rel=0.01)
