from __future__ import annotations

import math
from pathlib import Path

import pytest

from spinmem.cli.schemas import ConfigError, ScenarioConfig, load_config
from spinmem.domain import CouplingMode, GridResolutionError, RotationSpec

CONFIGS = Path(__file__).resolve().parents[2] / "configs"

BASE = {
    "physical": {"g_ens": 1.25},
    "schedule": {"t_mem": 20.0},
}


def _config(**sections) -> ScenarioConfig:
    data = {**BASE, **sections}
    return ScenarioConfig.model_validate(data)


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.toml")))
def test_shipped_configs_load(name):
    config = load_config(CONFIGS / name)
    assert config.scenario is not None
    assert config.file_prefix == name.removesuffix(".toml")


def test_defaults():
    config = _config()
    params = config.physical.to_params()
    assert params.n_spins == 1e12
    assert params.gamma_perp == 0.0
    assert params.g_ens == pytest.approx(1.25)
    assert config.grid.cut(params) == pytest.approx(100.0 * params.gamma)
    assert config.grid.spacing(20.0) == pytest.approx(2 * math.pi / 80.0)


def test_schedule_defaults_to_detuned_decoupling():
    schedule = _config().schedule
    assert schedule.decoupling == "detuned"
    waits, inverted = schedule.templates()
    assert waits.kappa == inverted.kappa == 0.75
    assert waits.delta_cs == 50.0
    assert inverted.delta_cs == -50.0
    assert waits.coupling_mode is CouplingMode.COUPLED
    assert _config().pulses.kappa == 7.5


def test_hard_decoupling_is_opt_in():
    waits, inverted = _config(schedule={"t_mem": 20.0, "decoupling": "hard"}).schedule.templates()
    assert waits.coupling_mode is inverted.coupling_mode is CouplingMode.HARD_DECOUPLED
    assert waits.kappa == 0.75


def test_memory_budget_in_gibibytes():
    assert _config().numerics.protocol().memory_budget == 8 * 2**30
    settings = _config(numerics={"memory_budget_gb": 0.5}).numerics.protocol()
    assert settings.memory_budget == 2**29
    with pytest.raises(ValueError):
        _config(numerics={"memory_budget_gb": 0})


def test_coupling_given_twice_rejected():
    with pytest.raises(ValueError, match="exactly one"):
        _config(physical={"g_ens": 1.0, "g": 1e-6})


def test_unknown_key_rejected():
    with pytest.raises(ValueError):
        _config(physical={"g_ens": 1.0, "kappa": 0.1})


def test_tau_and_gamma_perp_exclusive():
    with pytest.raises(ValueError, match="tau or gamma_perp"):
        _config(physical={"g_ens": 1.0, "tau": 10.0, "gamma_perp": 0.1})


def test_unknown_sweep_parameter():
    with pytest.raises(ValueError, match="unknown sweep parameter"):
        _config(sweep={"parameter": "colour", "values": [1.0]})


def test_decouple_scan_needs_detuned_waits():
    with pytest.raises(ValueError, match="detuned"):
        _config(scenario="decouple-scan", schedule={"t_mem": 20.0, "decoupling": "hard"})


def test_battery_magnitude_limited():
    with pytest.raises(ValueError):
        _config(battery={"magnitude": 3.0})


class TestSweep:
    def test_points_replace_the_parameter(self):
        config = _config(sweep={"parameter": "g_ens", "values": [1.5, 2.0]})
        points = config.sweep_points()
        assert [(i, v) for i, v, _ in points] == [(0, 1.5), (1, 2.0)]
        assert points[1][2].physical.g_ens == 2.0
        assert points[1][2].sweep.parameter is None

    def test_g_ens_sweep_clears_single_spin_coupling(self):
        config = _config(physical={"g": 1e-6}, sweep={"parameter": "g_ens", "values": [2.0]})
        [(_, _, point)] = config.sweep_points()
        assert point.physical.g is None
        assert point.physical.to_params().g_ens == pytest.approx(2.0)

    def test_no_sweep_is_one_point(self):
        config = _config()
        assert config.sweep_points() == [(0, None, config)]


def test_with_scenario_conflict():
    config = _config(scenario="run-protocol")
    with pytest.raises(ConfigError, match="declares scenario"):
        config.with_scenario("swap-scan")
    assert _config().with_scenario("swap-scan").name == "swap-scan"


def test_detuned_templates_follow_prime_sign():
    config = _config(
        schedule={
            "t_mem": 20.0,
            "decoupling": "detuned",
            "decouple_kappa": 0.75,
            "delta_cs": 10.0,
            "prime_sign": -1,
        }
    )
    waits, inverted = config.schedule.templates()
    assert waits.delta_cs == 10.0
    assert inverted.delta_cs == -10.0
    assert waits.coupling_mode is CouplingMode.COUPLED


def test_rotation_pulse_template():
    config = _config(pulses={"kind": "rotation", "axis": "x", "angle": math.pi / 2})
    spec = config.schedule_spec()
    assert spec.first_pulse.coupling_mode is CouplingMode.HARD_DECOUPLED
    assert spec.first_pulse.drive == RotationSpec.about_x(math.pi / 2)


def test_sech_pulse_duration_is_window():
    config = _config(pulses={"kind": "sech", "beta_sech": 2.0, "mu": 3.0, "chi_ratio": 1.0})
    template = config.schedule_spec().first_pulse
    assert template.duration == pytest.approx(8.0)
    assert config.pulses.rabi_max == pytest.approx(6.0)


def test_under_resolved_grid():
    config = _config(grid={"delta_cut": 5.0, "d_delta": 0.5})
    params = config.physical.to_params()
    with pytest.raises(GridResolutionError):
        config.grid.build(params, 20.0)
    allowed = _config(grid={"delta_cut": 5.0, "d_delta": 0.5, "allow_under_resolved": True})
    assert allowed.grid.build(params, 20.0).size == 21


class TestLoadConfig:
    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config(tmp_path / "absent.toml")

    def test_invalid_toml(self, tmp_path):
        path = tmp_path / "broken.toml"
        path.write_text("[physical\n", encoding="utf-8")
        with pytest.raises(ConfigError, match="invalid TOML"):
            load_config(path)

    def test_validation_error_becomes_config_error(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text("[physical]\ng_ens = -1.0\n[schedule]\nt_mem = 5.0\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            load_config(path)
