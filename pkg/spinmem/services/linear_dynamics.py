from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import OdeSolution
from scipy.linalg import expm
from scipy.optimize import brentq

from spinmem.domain import (
    CavitySegment,
    FrequencyGrid,
    LinearState,
    PhysicalParams,
    swap_closed_form,
    swap_time,
)
from spinmem.infra.integrator import (
    IntegratorSettings,
    integrate,
    pack_complex,
    unpack_complex,
)
from spinmem.services.base import DegenerateFitError, translate_integration_failures

logger = logging.getLogger(__name__)

Beta = Callable[[float], complex]

MIN_FIT_CLASSES = 5

__all__ = [
    "LinearTrajectory",
    "PhaseProfile",
    "TwoModeSystem",
    "evolve_linear",
    "first_zero_crossing",
    "focus_time",
    "phase_profile",
    "swap_closed_form",
    "swap_time",
    "two_mode_reduction",
]


@dataclass(frozen=True, eq=False)
class LinearTrajectory:
    times: NDArray[np.float64]
    a_c: NDArray[np.complex128]
    s_minus: NDArray[np.complex128]
    polarization: NDArray[np.float64]
    dense: OdeSolution | None = None

    @property
    def final(self) -> LinearState:
        return LinearState(
            a_c=complex(self.a_c[-1]),
            s_minus=np.array(self.s_minus[-1]),
            polarization=self.polarization,
        )

    def collective(self, grid: FrequencyGrid, params: PhysicalParams) -> NDArray[np.complex128]:
        return np.asarray(grid.collective(params, self.s_minus), dtype=np.complex128)

    def cavity_at(self, t: float | NDArray[np.float64]) -> complex | NDArray[np.complex128]:
        if self.dense is None:
            raise ValueError("trajectory was integrated without dense output")
        values = np.asarray(self.dense(t))
        return values[0] + 1j * values[values.shape[0] // 2]

    def records(
        self, grid: FrequencyGrid, params: PhysicalParams
    ) -> list[tuple[float, float, float, float, float]]:
        """Columnar rows ``(t, Re a_c, Im a_c, Re b, Im b)``."""
        b = self.collective(grid, params)
        return [
            (float(t), float(a.real), float(a.imag), float(bb.real), float(bb.imag))
            for t, a, bb in zip(self.times, self.a_c, b)
        ]


def _linear_rates(
    segment: CavitySegment,
    grid: FrequencyGrid,
    params: PhysicalParams,
    reverse_rates: bool,
) -> tuple[complex, NDArray[np.complex128]]:
    sign = -1.0 if reverse_rates else 1.0
    cavity = complex(sign * segment.kappa, segment.delta_cs)
    spins = sign * params.gamma_perp + grid.reduced_width + 1j * grid.deltas
    return cavity, spins.astype(np.complex128)


def evolve_linear(
    state: LinearState,
    segment: CavitySegment,
    grid: FrequencyGrid,
    params: PhysicalParams,
    *,
    beta: Beta | None = None,
    t_eval: NDArray[np.float64] | None = None,
    dense: bool = False,
    reverse_rates: bool = False,
    settings: IntegratorSettings | None = None,
) -> LinearTrajectory:
    """Integrate the linear mean equations over one segment.

    Time runs from 0 to ``segment.duration``. ``reverse_rates`` flips the
    signs of kappa and gamma_perp (used for the reverse swap).
    """
    settings = settings or IntegratorSettings()
    duration = segment.duration
    samples = np.array([] if t_eval is None else t_eval, dtype=np.float64)
    cavity_rate, spin_rates = _linear_rates(segment, grid, params, reverse_rates)
    polarization = state.polarization

    if not segment.coupled and beta is None and not dense:
        times = np.append(samples[(samples >= 0) & (samples < duration)], duration)
        a_c = state.a_c * np.exp(-cavity_rate * times)
        s = state.s_minus[None, :] * np.exp(-np.outer(times, spin_rates))
        return LinearTrajectory(times, a_c, s, polarization)

    couplings = grid.class_couplings(params) if segment.coupled else np.zeros(grid.size)
    g_spin = (params.g if segment.coupled else 0.0) * polarization
    drive_gain = math.sqrt(2.0 * segment.kappa)
    if beta is not None and reverse_rates:
        raise ValueError("a drive cannot be combined with reversed rates")

    def rhs(t: float, y: NDArray[np.float64]) -> NDArray[np.float64]:
        z = unpack_complex(y)
        a, s = z[0], z[1:]
        dz = np.empty_like(z)
        dz[0] = -cavity_rate * a - 1j * np.dot(couplings, s)
        if beta is not None:
            dz[0] += drive_gain * beta(t)
        dz[1:] = -spin_rates * s + 1j * g_spin * a
        return pack_complex(dz)

    y0 = pack_complex(np.concatenate([[state.a_c], state.s_minus]))
    with translate_integration_failures():
        trajectory = integrate(
            rhs, (0.0, duration), y0, settings, t_eval=samples, dense=dense, model="linear"
        )
    z = unpack_complex(trajectory.values)
    return LinearTrajectory(
        times=trajectory.times,
        a_c=z[:, 0],
        s_minus=z[:, 1:],
        polarization=polarization,
        dense=trajectory.dense,
    )


@dataclass(frozen=True, eq=False)
class TwoModeSystem:
    """``d/dt (a_c, b) = matrix @ (a_c, b)`` for the homogeneous-equivalent pair."""

    matrix: NDArray[np.complex128]

    @property
    def normal_mode_rates(self) -> NDArray[np.complex128]:
        return np.linalg.eigvals(self.matrix)

    def propagate(
        self, times: NDArray[np.float64], a0: complex, b0: complex = 0j
    ) -> tuple[NDArray[np.complex128], NDArray[np.complex128]]:
        start = np.array([a0, b0], dtype=np.complex128)
        values = np.array([expm(self.matrix * t) @ start for t in np.atleast_1d(times)])
        return values[:, 0], values[:, 1]


def two_mode_reduction(
    params: PhysicalParams, segment: CavitySegment, *, polarization: float = -1.0
) -> TwoModeSystem:
    """Exact reduction of the Lorentzian ensemble to one damped collective mode."""
    coupling = params.g_ens if segment.coupled else 0.0
    matrix = np.array(
        [
            [-complex(segment.kappa, segment.delta_cs), -1j * coupling],
            [1j * polarization * coupling, -params.gamma],
        ],
        dtype=np.complex128,
    )
    return TwoModeSystem(matrix)


def first_zero_crossing(trajectory: LinearTrajectory, *, resolution: int = 4000) -> float:
    """First time the cavity mean, projected on its initial phase, changes sign."""
    if trajectory.dense is None:
        raise ValueError("trajectory was integrated without dense output")
    a0 = complex(trajectory.a_c[0])
    if a0 == 0:
        raise DegenerateFitError("cavity starts empty: no zero crossing to find")
    phase = np.conj(a0) / abs(a0)

    def projected(t: float) -> float:
        return float((complex(trajectory.cavity_at(t)) * phase).real)

    grid = np.linspace(trajectory.times[0], trajectory.times[-1], resolution)
    values = np.array([projected(t) for t in grid])
    crossings = np.nonzero(np.sign(values[1:]) != np.sign(values[:-1]))[0]
    if crossings.size == 0:
        raise DegenerateFitError("cavity mean never crosses zero within the trajectory")
    k = int(crossings[0])
    return float(brentq(projected, grid[k], grid[k + 1], xtol=1e-14, rtol=1e-13))


@dataclass(frozen=True, eq=False)
class PhaseProfile:
    deltas: NDArray[np.float64]
    phases: NDArray[np.float64]

    def pairs(self) -> list[tuple[float, float]]:
        return [(float(d), float(p)) for d, p in zip(self.deltas, self.phases)]


def phase_profile(
    state: LinearState, grid: FrequencyGrid, *, amplitude_floor: float = 1e-14
) -> PhaseProfile:
    """Unwrapped phases ``phi`` with ``s_minus = |s_minus| * exp(-i*phi)``.

    Classes whose amplitude is below ``amplitude_floor`` times the largest
    one have no defined phase and are left out. Unwrapping starts at the
    class closest to resonance and proceeds outwards.
    """
    magnitude = np.abs(state.s_minus)
    peak = float(magnitude.max()) if magnitude.size else 0.0
    keep = magnitude > amplitude_floor * peak if peak > 0 else np.zeros_like(magnitude, bool)
    deltas = grid.deltas[keep]
    phases = -np.angle(state.s_minus[keep])
    if deltas.size == 0:
        return PhaseProfile(deltas, phases)
    centre = int(np.argmin(np.abs(deltas)))
    right = np.unwrap(phases[centre:])
    left = np.unwrap(phases[: centre + 1][::-1])[::-1]
    return PhaseProfile(deltas, np.concatenate([left[:-1], right]))


def focus_time(
    profile: PhaseProfile,
    fit_window: float | None = None,
    *,
    t_swap: float | None = None,
) -> float:
    """Slope of the phase against detuning near resonance, offset pinned to π/2.

    The default window is ``|delta| <= 0.5/t_swap``.
    """
    if fit_window is None:
        if not t_swap:
            raise ValueError("provide fit_window or t_swap")
        fit_window = 0.5 / t_swap
    inside = np.abs(profile.deltas) <= fit_window
    deltas = profile.deltas[inside]
    if deltas.size < MIN_FIT_CLASSES:
        raise DegenerateFitError(
            f"only {deltas.size} classes inside |delta| <= {fit_window:.6g}; "
            f"need at least {MIN_FIT_CLASSES}"
        )
    offset = profile.phases[inside] - math.pi / 2
    denominator = float(np.dot(deltas, deltas))
    if denominator == 0:
        raise DegenerateFitError("fit window holds only the resonant class")
    return float(np.dot(deltas, offset) / denominator)
