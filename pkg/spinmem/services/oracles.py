from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from spinmem.domain import DerivedRates, InvalidParameterError, PhysicalParams
from spinmem.services.base import InstabilityError

logger = logging.getLogger(__name__)

# |Δcs| 至少为 g_ens 的该倍数时，才认为腔场的绝热消除成立
ADIABATIC_DETUNING_RATIO = 5.0

__all__ = [
    "StarkParams",
    "adiabatic_trajectory",
    "decoupling_gain_theta",
    "detuning_noise_bound",
    "energy_leakage_deficit",
    "resn_predictions",
    "rule_of_thumb_gain",
]


@dataclass(frozen=True, slots=True)
class StarkParams:
    """Cavity-induced shifts of the two decoupling settings.

    ``zeta`` acts while the ensemble is not inverted, ``zeta_prime`` while it
    is; ``gamma_p`` is the correlated decay rate of the first setting and
    ``p`` its polarization.
    """

    zeta: complex
    zeta_prime: complex
    gamma_p: float = 0.0
    p: int = -1

    def __post_init__(self) -> None:
        if self.p not in (-1, 1):
            raise InvalidParameterError("p", "polarization must be -1 or +1")
        if self.gamma_p < 0:
            raise InvalidParameterError("gamma_p", "must be non-negative")

    @classmethod
    def for_detunings(
        cls,
        params: PhysicalParams,
        kappa: float,
        delta_cs: float,
        delta_cs_prime: float,
        *,
        kappa_prime: float | None = None,
    ) -> "StarkParams":
        first = DerivedRates.for_segment(params, kappa, delta_cs)
        second = DerivedRates.for_segment(
            params, kappa if kappa_prime is None else kappa_prime, delta_cs_prime
        )
        if first.zeta is None or second.zeta is None:
            raise InvalidParameterError(
                "delta_cs", "a resonant lossless cavity cannot be eliminated adiabatically"
            )
        return cls(zeta=first.zeta, zeta_prime=second.zeta, gamma_p=first.gamma_p)


def _decoupling_bracket(
    params: PhysicalParams, kappa: float, delta_cs: float, delta_cs_prime: float
) -> float:
    denominator = kappa * kappa + delta_cs * delta_cs
    if denominator == 0:
        raise InvalidParameterError("delta_cs", "detuning and kappa cannot both vanish")
    return params.g_ens_sq * (delta_cs + delta_cs_prime) / params.w / denominator


def decoupling_gain_theta(
    params: PhysicalParams,
    kappa: float,
    delta_cs: float,
    delta_cs_prime: float,
    t_mem: float,
) -> tuple[float, float]:
    """Gain and phase shift of the two-pulse refocusing with detuned decoupling.

    The gain is the leading-order form ``e^{-γ⊥ T_mem} (1 - x²)``. The end
    point of ``adiabatic_trajectory`` for the same segments has magnitude
    ``e^{-γ⊥ T_mem} / (1 + x²)``, so the two agree only up to ``O(x⁴)``.
    """
    if abs(delta_cs) < ADIABATIC_DETUNING_RATIO * params.g_ens:
        logger.warning(
            "[event=adiabatic_validity] detuning not large against g_ens",
            extra={"extra": {"delta_cs": delta_cs, "g_ens": params.g_ens}},
        )
    x = _decoupling_bracket(params, kappa, delta_cs, delta_cs_prime)
    gain = math.exp(-params.gamma_perp * t_mem) * (1.0 - x * x)
    return gain, -2.0 * math.atan(x)


def resn_predictions(
    params: PhysicalParams, kappa: float, delta_cs_prime: float
) -> tuple[float, float]:
    """Relative excess spin noise at the mid point and at the end of the protocol."""
    rates = DerivedRates.for_segment(params, kappa, delta_cs_prime)
    c_tilde = rates.c_tilde
    if c_tilde >= 1.0:
        raise InstabilityError(c_tilde)
    total = kappa + params.gamma
    mid = 2.0 * kappa * c_tilde / (total * (1.0 - c_tilde))
    return mid, mid * 2.0 * kappa / total


def adiabatic_trajectory(
    stark: StarkParams,
    quarter: float,
    s0: complex,
    t: ArrayLike,
    params: PhysicalParams,
) -> NDArray[np.complex128]:
    """Collective ``S₋(t)`` over ``[0, 4T]`` with ideal x-inversions at ``T`` and ``3T``.

    Beyond the first segment the forms assume ``T >> 1/w`` so the free
    induction has died out before each inversion.
    """
    if not quarter > 0:
        raise InvalidParameterError("quarter", "T must be positive")
    times = np.asarray(t, dtype=np.float64)
    if np.any(times < 0) or np.any(times > 4.0 * quarter * (1 + 1e-12)):
        raise InvalidParameterError("t", "outside [0, 4T]")
    w = params.w
    half = w / 2
    gamma_perp = params.gamma_perp
    zeta, zeta_p = stark.zeta, stark.zeta_prime
    echo = 1.0 + 1j * (np.conj(zeta) + zeta_p) / w
    final = (1.0 - 1j * (zeta + np.conj(zeta_p)) / w) ** 2
    s0_conj = np.conj(s0)
    values = np.empty(times.shape, dtype=np.complex128)
    edges = np.array([quarter, 2 * quarter, 3 * quarter])
    segment = np.searchsorted(edges, times, side="left")

    t1 = times[segment == 0]
    values[segment == 0] = s0 * np.exp(-params.gamma * t1) * np.exp(1j * zeta * t1)
    t2 = times[segment == 1]
    values[segment == 1] = (
        s0_conj
        * np.exp(-gamma_perp * t2)
        * np.exp((half + 1j * np.conj(zeta)) * (t2 - 2 * quarter))
        / echo
    )
    t3 = times[segment == 2]
    values[segment == 2] = (
        s0_conj
        * np.exp(-gamma_perp * t3)
        * np.exp(-(half + 1j * zeta_p) * (t3 - 2 * quarter))
        / echo
    )
    t4 = times[segment == 3]
    values[segment == 3] = (
        s0
        * np.exp(-gamma_perp * t4)
        * np.exp((half - 1j * np.conj(zeta_p)) * (t4 - 4 * quarter))
        / final
    )
    return values


def rule_of_thumb_gain(
    g0: float, kappa: float, gamma_perp: float, t_swap: float, t_mem: float
) -> float:
    return g0 * math.exp(-kappa * t_swap) * math.exp(-gamma_perp * (t_mem - t_swap))


def detuning_noise_bound(params: PhysicalParams, kappa: float, delta_cs: float) -> float:
    """Excess output noise ``2σ²-1 ≈ 4κ g_ens²/(Γ Δcs²)`` left by detuned decoupling.

    Valid for ``C̃ << 1`` and ``|Δcs| >> κ+Γ``.
    """
    if delta_cs == 0:
        return math.inf
    return 4.0 * kappa * params.g_ens_sq / (params.gamma * delta_cs * delta_cs)


def energy_leakage_deficit(params: PhysicalParams, kappa: float, delta_cs: float) -> float:
    """Gain deficit ``g_ens²/(κ²+Δcs²)`` from energy left in the detuned cavity.

    Not part of the adiabatic forms; it is the residual seen when
    ``Δcs' = -Δcs`` makes the adiabatic gain exactly ``e^{-γ⊥ T_mem}``.
    """
    denominator = kappa * kappa + delta_cs * delta_cs
    if denominator == 0:
        return math.inf
    return params.g_ens_sq / denominator
