from __future__ import annotations

import numpy as np
import pytest

from spinmem.domain import InvalidParameterError, LinearState, SystemState
from spinmem.domain.states import VACUUM_VARIANCE, covariance_size


def test_ground_state_covariance(small_grid):
    state = SystemState.ground(small_grid, 0.5 + 0.5j)
    assert state.a_c == 0.5 + 0.5j
    assert np.allclose(state.bloch[:, 2], -1.0)
    assert state.cov is not None
    assert state.cov.shape == (covariance_size(small_grid.size),) * 2
    assert np.allclose(state.cavity_covariance, VACUUM_VARIANCE * np.eye(2))
    # 极化自旋：横向方差 = N_m，纵向方差 = 0
    assert np.allclose(state.cov[2::3, 2::3].diagonal(), small_grid.populations)
    assert np.allclose(state.cov[4::3, 4::3].diagonal(), 0.0)
    assert state.excitation(small_grid) == 0.0


def test_inverted_state_is_fully_excited(small_grid):
    state = SystemState.inverted(small_grid, with_covariance=False)
    assert state.cov is None
    assert state.excitation(small_grid) == pytest.approx(1.0)


def test_coherent_spins_reproduce_collective_amplitude(params, small_grid):
    state = SystemState.coherent_spins(small_grid, params, 0.8j)
    assert state.collective(small_grid, params) == pytest.approx(0.8j)
    assert state.a_c == 0j


def test_linear_round_trip(params, small_grid):
    linear = LinearState.coherent_spins(small_grid, params, 1.0)
    state = SystemState.from_linear(small_grid, linear, with_covariance=False)
    back = state.to_linear()
    assert np.allclose(back.s_minus, linear.s_minus)
    assert np.array_equal(back.polarization, linear.polarization)


def test_quadratures_use_sqrt2_convention(small_grid):
    state = SystemState.ground(small_grid, 1.0 - 2.0j, with_covariance=False)
    x, p = state.quadratures
    assert x == pytest.approx(np.sqrt(2))
    assert p == pytest.approx(-2 * np.sqrt(2))


def test_bloch_vector_longer_than_one_rejected():
    with pytest.raises(InvalidParameterError):
        SystemState(a_c=0j, bloch=np.array([[0.0, 0.0, 1.1]]), cov=None)


def test_covariance_shape_checked():
    with pytest.raises(InvalidParameterError, match="cov"):
        SystemState(a_c=0j, bloch=np.array([[0.0, 0.0, -1.0]]), cov=np.eye(3))


def test_means_only_state_has_no_cavity_covariance(small_grid):
    state = SystemState.ground(small_grid, with_covariance=False)
    with pytest.raises(InvalidParameterError):
        _ = state.cavity_covariance


def test_linear_state_rejects_bad_polarization():
    with pytest.raises(InvalidParameterError):
        LinearState(a_c=0j, s_minus=np.zeros(2, complex), polarization=np.array([1.0, 0.5]))


def test_replace_can_drop_covariance(small_grid):
    state = SystemState.ground(small_grid)
    assert state.replace(drop_covariance=True).cov is None
    assert state.replace(time=3.0).time == 3.0
