from __future__ import annotations

import math

import numpy as np
import pytest

from spinmem.domain import (
    CavitySegment,
    DriveMode,
    DriveSpec,
    RotationSpec,
    SystemState,
    build_frequency_grid,
)
from spinmem.services import UndriveableCavityError
from spinmem.services.moment_dynamics import (
    ExternalDrive,
    PrescribedField,
    evolve_moments,
)
from spinmem.services.pulses import (
    apply_rotation,
    cavity_drive,
    rotation_matrix,
    sech_drive_amplitude,
    sech_drive_derivative,
)

SECH = DriveSpec(chi_max=12.0, beta_sech=2.0, mu=3.0)


class TestSechShape:
    def test_peak_at_centre(self):
        assert SECH.window == pytest.approx(8.0)
        assert sech_drive_amplitude(SECH, SECH.center, amplitude_max=2.0) == pytest.approx(2.0)

    def test_envelope_is_sech(self):
        t = SECH.center + 0.5
        value = sech_drive_amplitude(SECH, t)
        assert abs(value) == pytest.approx(1.0 / math.cosh(1.0))

    def test_zero_outside_window(self):
        values = sech_drive_amplitude(SECH, np.array([-0.1, 8.1]))
        assert np.all(values == 0)

    def test_derivative_matches_finite_difference(self):
        t, h = SECH.center + 0.3, 1e-6
        numeric = (sech_drive_amplitude(SECH, t + h) - sech_drive_amplitude(SECH, t - h)) / (2 * h)
        assert sech_drive_derivative(SECH, t) == pytest.approx(numeric, rel=1e-6)


class TestRotation:
    def test_x_pi_inverts_ground_state(self, small_grid):
        inverted = apply_rotation(SystemState.ground(small_grid), RotationSpec.about_x())
        assert np.allclose(inverted.bloch[:, 2], 1.0)
        assert inverted.excitation(small_grid) == pytest.approx(1.0)
        assert inverted.cov is not None
        # 横向投影噪声不变
        assert np.allclose(inverted.cov[2::3, 2::3].diagonal(), small_grid.populations)
        assert np.allclose(inverted.cov[4::3, 4::3].diagonal(), 0.0, atol=1e-3)

    def test_y_half_pi_tips_onto_equator(self):
        matrix = rotation_matrix(RotationSpec.about_y(math.pi / 2))
        assert np.allclose(matrix @ np.array([0.0, 0.0, -1.0]), [-1.0, 0.0, 0.0])

    def test_cavity_is_untouched(self, small_grid):
        state = SystemState.ground(small_grid, 0.3 + 0.2j)
        rotated = apply_rotation(state, RotationSpec.about_y())
        assert rotated.a_c == state.a_c
        assert np.allclose(rotated.cavity_covariance, state.cavity_covariance)


class TestCavityDrive:
    def test_rotation_segment_has_no_drive(self, params, small_grid):
        segment = CavitySegment(kappa=1.0, duration=0.0, drive=RotationSpec.about_x())
        assert cavity_drive(segment, SystemState.ground(small_grid), small_grid, params) is None

    def test_prescribed_mode(self, params, small_grid):
        segment = CavitySegment(kappa=1.0, duration=8.0, drive=SECH)
        drive = cavity_drive(segment, SystemState.ground(small_grid), small_grid, params)
        assert isinstance(drive, PrescribedField)
        amplitude = SECH.amplitude_max(params.g)
        assert drive.target(SECH.center) == pytest.approx(amplitude)

    def test_external_drive_needs_cavity_loss(self, params, small_grid):
        spec = DriveSpec(chi_max=12.0, beta_sech=2.0, mu=3.0, mode=DriveMode.EXTERNAL_BETA)
        segment = CavitySegment(kappa=0.0, duration=8.0, drive=spec)
        with pytest.raises(UndriveableCavityError):
            cavity_drive(segment, SystemState.ground(small_grid), small_grid, params)


def test_prescribed_sech_inverts_the_band(params):
    grid = build_frequency_grid(params, 2.0, 0.5)
    segment = CavitySegment(kappa=1.0, duration=SECH.window, drive=SECH)
    state = SystemState.ground(grid, with_covariance=False)
    drive = cavity_drive(segment, state, grid, params)
    final = evolve_moments(state, segment, grid, params, drive=drive).final
    assert final.bloch[grid.size // 2, 2] > 0.99
    assert final.excitation(grid) > 0.9


def test_inverse_filter_reproduces_target(params):
    grid = build_frequency_grid(params, 2.0, 0.5)
    spec = DriveSpec(chi_max=12.0, beta_sech=2.0, mu=3.0, mode=DriveMode.EXTERNAL_BETA)
    segment = CavitySegment(kappa=1.0, duration=spec.window, drive=spec)
    state = SystemState.ground(grid, with_covariance=False)
    drive = cavity_drive(segment, state, grid, params)
    assert isinstance(drive, ExternalDrive)
    times = np.linspace(1.0, 7.0, 13)
    trajectory = evolve_moments(state, segment, grid, params, drive=drive, t_eval=times)
    amplitude = spec.amplitude_max(params.g)
    target = sech_drive_amplitude(spec, trajectory.times, amplitude_max=amplitude)
    assert np.max(np.abs(trajectory.a_c - target)) < 2e-3 * amplitude
