from __future__ import annotations

import math
import pickle

import pytest

from spinmem.domain import DerivedRates, InvalidParameterError, PhysicalParams


def test_gamma_is_dephasing_plus_half_width():
    params = PhysicalParams(w=2.0, tau=10.0, n_spins=100.0, g=0.1)
    assert params.gamma_perp == pytest.approx(0.1)
    assert params.gamma == pytest.approx(1.1)


def test_infinite_tau_means_no_dephasing():
    params = PhysicalParams()
    assert params.gamma_perp == 0.0
    assert params.gamma == 0.5


def test_ensemble_coupling_round_trip():
    params = PhysicalParams.from_ensemble_coupling(2.5, n_spins=1e12)
    assert params.g == pytest.approx(2.5e-6)
    assert params.g_ens == pytest.approx(2.5)
    assert params.g_ens_sq == pytest.approx(6.25)


@pytest.mark.parametrize(
    ("kwargs", "field"),
    [
        ({"w": 0.0}, "w"),
        ({"w": math.inf}, "w"),
        ({"tau": 0.0}, "tau"),
        ({"n_spins": 0.5}, "n_spins"),
        ({"g": -1.0}, "g"),
    ],
)
def test_invalid_values_name_the_field(kwargs, field):
    with pytest.raises(InvalidParameterError) as info:
        PhysicalParams(**kwargs)
    assert info.value.field == field


def test_invalid_parameter_error_survives_pickling():
    error = InvalidParameterError("kappa", "must be non-negative")
    restored = pickle.loads(pickle.dumps(error))
    assert restored.field == "kappa"
    assert str(restored) == str(error)


def test_cooperativity_without_loss_is_infinite(params):
    assert params.cooperativity(0.0) == math.inf
    assert PhysicalParams().cooperativity(0.0) == 0.0


def test_with_gamma_perp_keeps_coupling(params):
    other = params.with_gamma_perp(0.02)
    assert other.tau == pytest.approx(50.0)
    assert other.g_ens == pytest.approx(params.g_ens)
    assert params.with_gamma_perp(0.0).tau == math.inf


class TestDerivedRates:
    def test_detuning_suppresses_cooperativity(self, params):
        kappa = 0.75
        resonant = DerivedRates.for_segment(params, kappa, 0.0)
        detuned = DerivedRates.for_segment(params, kappa, 5.0)
        assert resonant.c_tilde == pytest.approx(resonant.cooperativity)
        suppression = 1 + (5.0 / (kappa + params.gamma)) ** 2
        assert detuned.c_tilde == pytest.approx(resonant.cooperativity / suppression)

    def test_stark_shift(self, params):
        rates = DerivedRates.for_segment(params, 0.75, 5.0)
        denominator = 0.75**2 + 25.0
        assert rates.zeta == pytest.approx(params.g_ens_sq * complex(5.0, 0.75) / denominator)
        assert rates.gamma_p == pytest.approx(2 * 0.75 * params.g**2 / denominator)

    def test_resonant_lossless_cavity_has_no_shift(self, params):
        rates = DerivedRates.for_segment(params, 0.0, 0.0)
        assert rates.zeta is None
        assert rates.gamma_p == 0.0

    def test_negative_kappa_rejected(self, params):
        with pytest.raises(InvalidParameterError):
            DerivedRates.for_segment(params, -0.1, 0.0)
