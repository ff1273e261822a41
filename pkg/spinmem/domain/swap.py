"""Closed forms of the resonant cavity-ensemble exchange."""

from __future__ import annotations

import math

import numpy as np
from numpy.typing import ArrayLike, NDArray

from spinmem.domain.errors import OverdampedSwapError
from spinmem.domain.params import PhysicalParams


def _rates(params: PhysicalParams, kappa: float, reverse: bool) -> tuple[float, float]:
    gamma_perp = params.gamma_perp
    if reverse:
        kappa, gamma_perp = -kappa, -gamma_perp
    return kappa, gamma_perp + params.w / 2


def effective_frequency(
    params: PhysicalParams, kappa: float, *, reverse: bool = False
) -> float:
    """g' = g_ens*sqrt(1 - (kappa-Gamma)^2 / 4 g_ens^2)."""
    kappa, gamma = _rates(params, kappa, reverse)
    g_ens_sq = params.g_ens_sq
    if g_ens_sq == 0:
        raise OverdampedSwapError("no coupling: the exchange never starts")
    discriminant = 1.0 - (kappa - gamma) ** 2 / (4.0 * g_ens_sq)
    if discriminant <= 0:
        raise OverdampedSwapError(
            f"overdamped exchange: |kappa-Gamma|={abs(kappa - gamma):.6g} "
            f">= 2*g_ens={2 * params.g_ens:.6g}"
        )
    return math.sqrt(g_ens_sq * discriminant)


def swap_time(params: PhysicalParams, kappa: float, *, reverse: bool = False) -> float:
    """Time at which the cavity mean first vanishes.

    ``reverse`` flips the signs of kappa and gamma_perp (the reverse swap).
    """
    g_prime = effective_frequency(params, kappa, reverse=reverse)
    kappa, gamma = _rates(params, kappa, reverse)
    x = (kappa - gamma) / (2.0 * g_prime)
    return (math.pi / (2.0 * g_prime)) * (1.0 - (2.0 / math.pi) * math.atan(x))


def swap_closed_form(
    t: ArrayLike, alpha: complex, params: PhysicalParams, kappa: float
) -> tuple[NDArray[np.complex128], NDArray[np.complex128]]:
    g_prime = effective_frequency(params, kappa)
    gamma = params.gamma
    times = np.asarray(t, dtype=np.float64)
    envelope = np.exp(-(kappa + gamma) * times / 2)
    phase = g_prime * times
    a_c = alpha * envelope * (
        np.cos(phase) - ((kappa - gamma) / (2.0 * g_prime)) * np.sin(phase)
    )
    b = -1j * alpha * (params.g_ens / g_prime) * envelope * np.sin(phase)
    return a_c.astype(np.complex128), b.astype(np.complex128)
