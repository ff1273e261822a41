"""Numerical hygiene checks: cut-off convergence, artificial revivals, PSD monitor."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.signal import find_peaks

from spinmem.domain import (
    CavitySegment,
    CouplingMode,
    FrequencyGrid,
    LinearState,
    PhysicalParams,
    SystemState,
    auto_d_delta,
    build_frequency_grid,
)
from spinmem.infra.integrator import IntegratorSettings
from spinmem.services.linear_dynamics import evolve_linear
from spinmem.services.moment_dynamics import evolve_moments
from spinmem.services.noise_closed_forms import (
    inverted_decay_closed_form,
    transient_variance_closed_form,
)

logger = logging.getLogger(__name__)

DEFAULT_CUTS = (20.0, 30.0, 50.0, 100.0)
# 复苏判据：局部极大值超过基线的倍数
REVIVAL_RATIO = 10.0

__all__ = [
    "ConvergencePoint",
    "PsdSummary",
    "RevivalReport",
    "convergence_scan",
    "detect_revival",
    "free_induction",
    "is_monotone_decreasing",
    "psd_summary",
    "revival_baseline",
]


@dataclass(frozen=True, slots=True)
class ConvergencePoint:
    cut_over_gamma: float
    classes: int
    mean_error: float
    variance_error: float | None


def _inverted_run(
    params: PhysicalParams,
    grid: FrequencyGrid,
    kappa: float,
    times: NDArray[np.float64],
    alpha: complex,
    with_covariance: bool,
    settings: IntegratorSettings | None,
) -> tuple[NDArray[np.complex128], NDArray[np.float64] | None]:
    segment = CavitySegment(kappa=kappa, duration=float(times[-1]), label="validation")
    start = SystemState.inverted(grid, alpha, with_covariance=with_covariance)
    trajectory = evolve_moments(
        start, segment, grid, params, t_eval=times, settings=settings, exact_propagation=False
    )
    s_minus = 0.5 * (trajectory.bloch[:, :, 0] - 1j * trajectory.bloch[:, :, 1])
    s_eff = s_minus @ grid.populations
    if not trajectory.observables:
        return s_eff, None
    # 共振且无失谐时 Var Sx = Var Sy，故 Var S_x^eff = N·(RESN + 1)
    total = float(np.sum(grid.populations))
    resn = np.array([obs.resn for obs in trajectory.observables])
    return s_eff, total * (resn + 1.0)


def convergence_scan(
    params: PhysicalParams,
    kappa: float,
    *,
    cuts: Sequence[float] = DEFAULT_CUTS,
    d_delta: float | None = None,
    t_end: float | None = None,
    samples: int = 31,
    alpha: complex = 1e-3,
    with_covariance: bool = False,
    settings: IntegratorSettings | None = None,
) -> list[ConvergencePoint]:
    """Deviation from the inverted-decay closed forms for growing cut-offs.

    ``cuts`` are multiples of Γ; errors are maxima over ``[0, t_end]``
    relative to the peak of the closed form. The spacing defaults to the
    revival-safe value for ``t_end``.
    """
    gamma = params.gamma
    t_end = 3.0 / gamma if t_end is None else t_end
    times = np.linspace(0.0, t_end, samples)
    d_delta = auto_d_delta(t_end) if d_delta is None else d_delta
    _, exact_s = inverted_decay_closed_form(times, alpha, params, kappa)
    exact_var = None
    if with_covariance:
        exact_var = transient_variance_closed_form(times, params, kappa)[1]

    points = []
    for cut in cuts:
        grid = build_frequency_grid(params, cut * gamma, d_delta)
        s_eff, var_sx = _inverted_run(
            params, grid, kappa, times, alpha, with_covariance, settings
        )
        mean_error = float(np.max(np.abs(s_eff - exact_s)) / np.max(np.abs(exact_s)))
        variance_error = None
        if var_sx is not None and exact_var is not None:
            variance_error = float(np.max(np.abs(var_sx - exact_var) / exact_var))
        points.append(ConvergencePoint(cut, grid.size, mean_error, variance_error))
        logger.info(
            "[event=convergence_point]",
            extra={
                "extra": {
                    "cut_over_gamma": cut,
                    "classes": grid.size,
                    "mean_error": mean_error,
                    "variance_error": variance_error,
                }
            },
        )
    return points


def is_monotone_decreasing(values: Iterable[float]) -> bool:
    items = list(values)
    return all(b < a for a, b in zip(items, items[1:]))


def free_induction(
    grid: FrequencyGrid,
    params: PhysicalParams,
    times: NDArray[np.float64],
) -> NDArray[np.complex128]:
    """Collective mean of a drive-free, decoupled ensemble started at ``b = 1``."""
    segment = CavitySegment(
        kappa=0.0,
        duration=float(times[-1]),
        coupling_mode=CouplingMode.HARD_DECOUPLED,
        label="free_induction",
    )
    start = LinearState.coherent_spins(grid, params, 1.0)
    trajectory = evolve_linear(start, segment, grid, params, t_eval=times)
    return trajectory.collective(grid, params)


def revival_baseline(
    times: NDArray[np.float64], grid: FrequencyGrid, params: PhysicalParams
) -> NDArray[np.float64]:
    """Continuum decay plus the truncation ringing envelope."""
    mass = grid.lorentzian_mass if grid.normalization == "renormalized" else 1.0
    decay = np.exp(-params.gamma * times) / mass
    with np.errstate(divide="ignore"):
        ringing = (params.w / math.pi) * 2.0 / (grid.delta_cut**2 * times)
    return decay + np.where(times > 0, ringing, np.inf)


@dataclass(frozen=True, slots=True)
class RevivalReport:
    detected: bool
    time: float | None
    ratio: float
    expected_time: float


def detect_revival(
    times: NDArray[np.float64],
    b: NDArray[np.complex128],
    grid: FrequencyGrid,
    params: PhysicalParams,
    *,
    ratio: float = REVIVAL_RATIO,
) -> RevivalReport:
    """First local maximum of ``|b|`` whose prominence exceeds ``ratio`` times the baseline.

    Ringing bumps riding on a rising alias have small prominence and are ignored.
    """
    magnitude = np.abs(b)
    baseline = revival_baseline(times, grid, params)
    peaks, properties = find_peaks(magnitude, prominence=0.0)
    excess = properties["prominences"] / baseline[peaks]
    flagged = peaks[excess > ratio]
    best = float(excess.max()) if excess.size else 0.0
    if flagged.size == 0:
        return RevivalReport(False, None, best, grid.revival_time)
    first = int(flagged[0])
    logger.warning(
        "[event=artificial_revival]",
        extra={
            "extra": {
                "time": float(times[first]),
                "expected": grid.revival_time,
                "d_delta": grid.d_delta,
            }
        },
    )
    return RevivalReport(True, float(times[first]), best, grid.revival_time)


@dataclass(frozen=True, slots=True)
class PsdSummary:
    checked: int
    min_eigenvalue: float
    min_relative: float
    time: float


def psd_summary(states: Sequence[SystemState]) -> PsdSummary:
    """Smallest covariance eigenvalue (absolute and relative to the trace)."""
    worst = (math.inf, math.inf, math.nan)
    checked = 0
    for state in states:
        if state.cov is None:
            continue
        checked += 1
        smallest = float(np.linalg.eigvalsh(state.cov)[0])
        relative = smallest / max(float(np.trace(state.cov)), 1.0)
        if relative < worst[1]:
            worst = (smallest, relative, state.time)
    return PsdSummary(checked, worst[0], worst[1], worst[2])
