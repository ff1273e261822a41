from __future__ import annotations

import logging
import math

import numpy as np
import pytest

from spinmem.domain import InvalidParameterError, PhysicalParams
from spinmem.services import InstabilityError
from spinmem.services.oracles import (
    StarkParams,
    adiabatic_trajectory,
    decoupling_gain_theta,
    detuning_noise_bound,
    energy_leakage_deficit,
    resn_predictions,
    rule_of_thumb_gain,
)


@pytest.fixture
def weak() -> PhysicalParams:
    return PhysicalParams.from_ensemble_coupling(0.2, n_spins=1e12, tau=100.0)


class TestStarkParams:
    def test_opposite_detunings_give_conjugate_shifts(self, weak):
        stark = StarkParams.for_detunings(weak, 0.5, 10.0, -10.0)
        assert stark.zeta_prime.real == pytest.approx(-stark.zeta.real)
        assert stark.zeta_prime.imag == pytest.approx(stark.zeta.imag)
        assert stark.gamma_p > 0

    def test_resonant_lossless_cavity_rejected(self, weak):
        with pytest.raises(InvalidParameterError):
            StarkParams.for_detunings(weak, 0.0, 0.0, 10.0)

    def test_polarization_checked(self):
        with pytest.raises(InvalidParameterError):
            StarkParams(zeta=0j, zeta_prime=0j, p=0)


class TestDecoupling:
    def test_opposite_detunings_cancel_phase(self, weak):
        gain, theta = decoupling_gain_theta(weak, 0.5, 10.0, -10.0, 40.0)
        assert gain == pytest.approx(math.exp(-weak.gamma_perp * 40.0))
        assert theta == pytest.approx(0.0)

    def test_same_sign_detunings_rotate(self, weak):
        gain, theta = decoupling_gain_theta(weak, 0.5, 10.0, 10.0, 40.0)
        x = weak.g_ens_sq * 20.0 / weak.w / (0.25 + 100.0)
        assert theta == pytest.approx(-2.0 * math.atan(x))
        assert gain == pytest.approx(math.exp(-weak.gamma_perp * 40.0) * (1 - x * x))

    def test_agrees_with_trajectory_end_to_fourth_order(self, weak):
        gain, _ = decoupling_gain_theta(weak, 0.5, 10.0, 10.0, 40.0)
        stark = StarkParams.for_detunings(weak, 0.5, 10.0, 10.0)
        [end] = adiabatic_trajectory(stark, 10.0, 1.0, [40.0], weak)
        x = weak.g_ens_sq * 20.0 / weak.w / (0.25 + 100.0)
        decay = math.exp(-weak.gamma_perp * 40.0)
        assert abs(end) == pytest.approx(decay / (1 + x * x), rel=1e-12)
        # 两者只在 O(x⁴) 上不同
        assert (abs(end) - gain) / decay == pytest.approx(x**4 / (1 + x * x), rel=1e-5)

    def test_small_detuning_warns(self, weak, caplog):
        with caplog.at_level(logging.WARNING, logger="spinmem.services.oracles"):
            decoupling_gain_theta(weak, 0.5, 0.5, -0.5, 40.0)
        assert "adiabatic_validity" in caplog.text


def test_resn_predictions_below_threshold(weak):
    mid, end = resn_predictions(weak, 0.5, 0.0)
    c_tilde = weak.g_ens_sq / (0.5 * weak.gamma)
    total = 0.5 + weak.gamma
    assert mid == pytest.approx(2 * 0.5 * c_tilde / (total * (1 - c_tilde)))
    assert end == pytest.approx(mid * 2 * 0.5 / total)


def test_resn_predictions_unstable(params):
    with pytest.raises(InstabilityError):
        resn_predictions(params, 0.5, 0.0)


class TestAdiabaticTrajectory:
    def test_echo_restores_amplitude_without_shifts(self):
        params = PhysicalParams.from_ensemble_coupling(0.2, n_spins=1e12)
        stark = StarkParams(zeta=0j, zeta_prime=0j)
        values = adiabatic_trajectory(stark, 10.0, 0.3 + 0.1j, [0.0, 40.0], params)
        assert values[0] == pytest.approx(0.3 + 0.1j)
        assert values[1] == pytest.approx(0.3 + 0.1j)

    def test_first_segment_decays_at_gamma(self, weak):
        stark = StarkParams(zeta=0j, zeta_prime=0j)
        values = adiabatic_trajectory(stark, 10.0, 1.0, np.array([2.0]), weak)
        assert values[0] == pytest.approx(math.exp(-2.0 * weak.gamma))

    def test_times_outside_protocol_rejected(self, weak):
        stark = StarkParams(zeta=0j, zeta_prime=0j)
        with pytest.raises(InvalidParameterError):
            adiabatic_trajectory(stark, 10.0, 1.0, [41.0], weak)


def test_rule_of_thumb_gain():
    assert rule_of_thumb_gain(1.0, 0.1, 0.01, 2.0, 20.0) == pytest.approx(
        math.exp(-0.2) * math.exp(-0.18)
    )


def test_detuning_bounds(weak):
    assert detuning_noise_bound(weak, 0.5, 0.0) == math.inf
    assert detuning_noise_bound(weak, 0.5, 10.0) == pytest.approx(
        4 * 0.5 * weak.g_ens_sq / (weak.gamma * 100.0)
    )
    assert energy_leakage_deficit(weak, 0.5, 10.0) == pytest.approx(weak.g_ens_sq / 100.25)
    assert energy_leakage_deficit(weak, 0.0, 0.0) == math.inf
