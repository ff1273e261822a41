from __future__ import annotations

import math

import numpy as np
import pytest

from spinmem.domain import (
    OverdampedSwapError,
    PhysicalParams,
    effective_frequency,
    swap_closed_form,
    swap_time,
)


def test_matched_loss_gives_bare_coupling(params):
    # κ = Γ：g' = g_ens，T_swap = π/(2 g_ens)
    kappa = params.gamma
    assert effective_frequency(params, kappa) == pytest.approx(params.g_ens)
    assert swap_time(params, kappa) == pytest.approx(math.pi / (2 * params.g_ens))


def test_cavity_empties_at_swap_time(params):
    kappa = 0.3
    t_swap = swap_time(params, kappa)
    a_c, b = swap_closed_form([0.0, t_swap], 1.0, params, kappa)
    assert a_c[0] == pytest.approx(1.0)
    assert abs(a_c[1]) < 1e-12
    assert abs(b[1]) > 0.5


def test_lossless_exchange_conserves_excitation():
    params = PhysicalParams(w=1e-9, n_spins=1e12, g=1e-6)
    times = np.linspace(0.0, 3.0, 7)
    a_c, b = swap_closed_form(times, 1.0, params, 0.0)
    assert np.allclose(np.abs(a_c) ** 2 + np.abs(b) ** 2, 1.0, atol=1e-8)


def test_reverse_swap_matches_forward_without_loss(params):
    assert swap_time(params, 0.0, reverse=True) == pytest.approx(swap_time(params, 0.0))


def test_reverse_swap_with_loss_differs():
    lossy = PhysicalParams.from_ensemble_coupling(1.25, n_spins=1e12, tau=20.0)
    assert swap_time(lossy, 0.2, reverse=True) != pytest.approx(swap_time(lossy, 0.2))


def test_overdamped_exchange_rejected():
    weak = PhysicalParams.from_ensemble_coupling(0.1, n_spins=1e12)
    with pytest.raises(OverdampedSwapError, match="overdamped"):
        swap_time(weak, 0.0)


def test_uncoupled_ensemble_rejected():
    with pytest.raises(OverdampedSwapError):
        effective_frequency(PhysicalParams(), 0.1)
