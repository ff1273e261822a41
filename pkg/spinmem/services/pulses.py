"""Inversion pulses: hyperbolic-secant cavity drives and instantaneous rotations."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import OdeSolution
from scipy.spatial.transform import Rotation

from spinmem.domain import (
    CavitySegment,
    DriveMode,
    DriveSpec,
    FrequencyGrid,
    PhysicalParams,
    RotationSpec,
    SystemState,
)
from spinmem.infra.integrator import IntegratorSettings
from spinmem.services.base import UndriveableCavityError
from spinmem.services.moment_dynamics import (
    CavityDrive,
    ExternalDrive,
    PrescribedField,
    apply_block_diagonal,
    evolve_moments,
)

__all__ = [
    "FilteredBeta",
    "apply_rotation",
    "cavity_drive",
    "inverse_filter_beta",
    "rotation_matrix",
    "sech_drive_amplitude",
    "sech_drive_derivative",
]

_LN2 = math.log(2.0)


def _log_sech(x: NDArray[np.float64]) -> NDArray[np.float64]:
    ax = np.abs(x)
    return -ax + _LN2 - np.log1p(np.exp(-2.0 * ax))


def _shape(spec: DriveSpec, t: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.complex128]]:
    times = np.asarray(t, dtype=np.float64)
    x = spec.beta_sech * (times - spec.center)
    inside = np.abs(times - spec.center) <= spec.window / 2
    profile = np.exp((1.0 + 1j * spec.mu) * _log_sech(x))
    return x, np.where(inside, profile, 0j)


def sech_drive_amplitude(
    spec: DriveSpec, t: ArrayLike, *, amplitude_max: float = 1.0
) -> complex | NDArray[np.complex128]:
    """``a_max * sech(x) * exp(i*mu*ln sech x)`` with ``x = beta*(t - t_center)``.

    Zero outside the truncation window.
    """
    _, profile = _shape(spec, t)
    values = amplitude_max * profile
    return complex(values) if values.ndim == 0 else values


def sech_drive_derivative(
    spec: DriveSpec, t: ArrayLike, *, amplitude_max: float = 1.0
) -> complex | NDArray[np.complex128]:
    x, profile = _shape(spec, t)
    values = -amplitude_max * (1.0 + 1j * spec.mu) * spec.beta_sech * np.tanh(x) * profile
    return complex(values) if values.ndim == 0 else values


def _prescribed(spec: DriveSpec, params: PhysicalParams) -> PrescribedField:
    amplitude = spec.amplitude_max(params.g)

    def target(t: float) -> complex:
        return complex(sech_drive_amplitude(spec, t, amplitude_max=amplitude))

    def derivative(t: float) -> complex:
        return complex(sech_drive_derivative(spec, t, amplitude_max=amplitude))

    return PrescribedField(target=target, derivative=derivative)


@dataclass(frozen=True, eq=False)
class FilteredBeta:
    """External field that makes the intracavity mean follow ``desired``.

    Spin means come from a dense reference run with the cavity pinned to
    ``desired``; times are relative to the segment start.
    """

    desired: PrescribedField
    cavity_rate: complex
    drive_gain: float
    couplings: NDArray[np.float64]
    spins: OdeSolution | None
    initial_s_minus: NDArray[np.complex128]

    def s_minus(self, t: float) -> NDArray[np.complex128]:
        if self.spins is None:
            return self.initial_s_minus
        y = np.asarray(self.spins(t))
        bloch = y[2:].reshape(-1, 3)
        return 0.5 * (bloch[:, 0] - 1j * bloch[:, 1])

    def __call__(self, t: float) -> complex:
        reaction = 1j * np.dot(self.couplings, self.s_minus(t))
        field = (
            self.desired.derivative(t)
            + self.cavity_rate * self.desired.target(t)
            + reaction
        )
        return complex(field / self.drive_gain)


def inverse_filter_beta(
    desired: PrescribedField,
    state: SystemState,
    segment: CavitySegment,
    grid: FrequencyGrid,
    params: PhysicalParams,
    *,
    settings: IntegratorSettings | None = None,
) -> FilteredBeta:
    """β(t) = [ȧ_d + (κ+iΔcs)a_d + iΣ G_m s_m(t)] / √(2κ)."""
    if segment.kappa <= 0:
        raise UndriveableCavityError(
            f"segment {segment.label or '?'} has kappa=0: the cavity cannot be driven"
        )
    couplings = grid.class_couplings(params) if segment.coupled else np.zeros(grid.size)
    spins: OdeSolution | None = None
    if segment.duration > 0:
        reference = evolve_moments(
            state.replace(a_c=desired.target(0.0), drop_covariance=True),
            segment,
            grid,
            params,
            drive=desired,
            dense=True,
            settings=settings,
        )
        spins = reference.dense
    return FilteredBeta(
        desired=desired,
        cavity_rate=complex(segment.kappa, segment.delta_cs),
        drive_gain=math.sqrt(2.0 * segment.kappa),
        couplings=np.asarray(couplings, dtype=np.float64),
        spins=spins,
        initial_s_minus=state.s_minus,
    )


def cavity_drive(
    segment: CavitySegment,
    state: SystemState,
    grid: FrequencyGrid,
    params: PhysicalParams,
    *,
    settings: IntegratorSettings | None = None,
) -> CavityDrive | None:
    """Drive acting during ``segment``; ``None`` for rotations and free segments."""
    spec = segment.drive
    if not isinstance(spec, DriveSpec):
        return None
    field = _prescribed(spec, params)
    if spec.mode is DriveMode.PRESCRIBED:
        return field
    beta = inverse_filter_beta(field, state, segment, grid, params, settings=settings)
    return ExternalDrive(beta=beta)


def rotation_matrix(spec: RotationSpec) -> NDArray[np.float64]:
    rotvec = np.asarray(spec.axis, dtype=np.float64) * spec.angle
    return np.asarray(Rotation.from_rotvec(rotvec).as_matrix(), dtype=np.float64)


def apply_rotation(state: SystemState, spec: RotationSpec) -> SystemState:
    """Rotate every class's Bloch vector; the cavity block is left untouched."""
    matrix = rotation_matrix(spec)
    bloch = state.bloch @ matrix.T
    cov = None
    if state.cov is not None:
        spins = np.broadcast_to(matrix, (state.classes, 3, 3))
        cov = apply_block_diagonal(np.eye(2), np.ascontiguousarray(spins), state.cov)
        cov = 0.5 * (cov + cov.T)
    return SystemState(a_c=state.a_c, bloch=bloch, cov=cov, time=state.time)
