"""Closed forms for the inverted, resonantly coupled ensemble.

Used as oracles for the moment propagation and as fast estimators of the
noise added while the ensemble sits inverted next to the cavity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
from numpy.typing import ArrayLike, NDArray

from spinmem.domain import DerivedRates, PhysicalParams
from spinmem.services.base import InstabilityError

# λ₊ 与 λ₋ 的相对差小于该值时按简并极限处理
_DEGENERATE_RELATIVE = 1e-9

__all__ = [
    "EigenRates",
    "eigenrates",
    "inverted_decay_closed_form",
    "steady_state_noise",
    "transient_variance_closed_form",
]


@dataclass(frozen=True, slots=True)
class EigenRates:
    plus: float
    minus: float
    zero: float

    def __iter__(self) -> Iterator[float]:
        return iter((self.plus, self.minus, self.zero))

    @property
    def degenerate(self) -> bool:
        scale = max(abs(self.plus), abs(self.minus), 1e-300)
        return abs(self.plus - self.minus) <= _DEGENERATE_RELATIVE * scale


def eigenrates(params: PhysicalParams, kappa: float) -> EigenRates:
    """λ± = -(κ+Γ)/2 ± ½√((κ-Γ)² + 4 g_ens²) and λ₀ = (λ₊+λ₋)/2."""
    gamma = params.gamma
    mean = -(kappa + gamma) / 2.0
    half_split = 0.5 * math.sqrt((kappa - gamma) ** 2 + 4.0 * params.g_ens_sq)
    return EigenRates(plus=mean + half_split, minus=mean - half_split, zero=mean)


def inverted_decay_closed_form(
    t: ArrayLike, alpha: complex, params: PhysicalParams, kappa: float
) -> tuple[NDArray[np.complex128], NDArray[np.complex128]]:
    """Cavity mean and ``S₋^eff = Σ σ₋`` of a fully inverted ensemble seeded by ``alpha``."""
    rates = eigenrates(params, kappa)
    times = np.asarray(t, dtype=np.float64)
    gamma = params.gamma
    scale = 1j * params.g_bar * params.n_spins * alpha
    if rates.degenerate:
        lam = rates.zero
        growth = np.exp(lam * times)
        a_c = alpha * growth * (1.0 + (lam + gamma) * times)
        s_eff = scale * times * growth
    else:
        e_plus = np.exp(rates.plus * times)
        e_minus = np.exp(rates.minus * times)
        split = rates.plus - rates.minus
        a_c = alpha * ((rates.plus + gamma) * e_plus - (rates.minus + gamma) * e_minus) / split
        s_eff = scale * (e_plus - e_minus) / split
    return np.asarray(a_c, dtype=np.complex128), np.asarray(s_eff, dtype=np.complex128)


def _stationary_point(
    params: PhysicalParams, kappa: float, delta_cs: float = 0.0
) -> tuple[float, float]:
    """Constant solution of the variance equations; physical only when C̃ < 1."""
    gamma = params.gamma
    total = kappa + gamma
    # 分子分母同乘 κ，κ → 0 时保持连续
    base = kappa * (1.0 + (delta_cs / total) ** 2)
    pull = params.g_ens_sq * (kappa - gamma) / (gamma * total)
    denominator = base - params.g_ens_sq / gamma
    var_x = 0.5 * (base - pull) / denominator
    var_s = params.n_spins * (base + pull) / denominator
    return var_x, var_s


def steady_state_noise(
    params: PhysicalParams, kappa: float, delta_cs: float = 0.0
) -> tuple[float, float]:
    """Stationary ``Var X_c`` and ``Var S_x^eff`` of the inverted ensemble."""
    rates = DerivedRates.for_segment(params, kappa, delta_cs)
    if rates.c_tilde >= 1.0:
        raise InstabilityError(rates.c_tilde)
    if params.g_ens_sq == 0:
        return 0.5, float(params.n_spins)
    return _stationary_point(params, kappa, delta_cs)


def transient_variance_closed_form(
    t: ArrayLike, params: PhysicalParams, kappa: float
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """``Var X_c(t)`` and ``Var S_x^eff(t)`` from vacuum cavity and inverted spins.

    Valid for any cooperativity as long as no rate vanishes; above threshold
    the variances grow without bound.
    """
    times = np.asarray(t, dtype=np.float64)
    if params.g_ens_sq == 0:
        return np.full_like(times, 0.5), np.full_like(times, float(params.n_spins))
    rates = eigenrates(params, kappa)
    if rates.plus == 0.0 or rates.minus == 0.0:
        raise InstabilityError(DerivedRates.for_segment(params, kappa, 0.0).c_tilde)
    gamma = params.gamma
    prefactor = params.g_ens_sq / ((kappa - gamma) ** 2 + 4.0 * params.g_ens_sq)
    e_plus = np.exp(2.0 * rates.plus * times)
    e_minus = np.exp(2.0 * rates.minus * times)
    e_zero = np.exp(2.0 * rates.zero * times)
    cross = (kappa - gamma) / rates.zero
    var_x_end, var_s_end = _stationary_point(params, kappa)
    var_x = var_x_end + prefactor * (
        (gamma + rates.plus) / rates.plus * e_plus
        + (gamma + rates.minus) / rates.minus * e_minus
        + cross * e_zero
    )
    var_s = var_s_end + 2.0 * params.n_spins * prefactor * (
        (kappa + rates.plus) / rates.plus * e_plus
        + (kappa + rates.minus) / rates.minus * e_minus
        - cross * e_zero
    )
    return np.asarray(var_x, dtype=np.float64), np.asarray(var_s, dtype=np.float64)

