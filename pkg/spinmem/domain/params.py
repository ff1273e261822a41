from __future__ import annotations

import math
from dataclasses import dataclass

from spinmem.domain.errors import InvalidParameterError


@dataclass(frozen=True, slots=True)
class PhysicalParams:
    """Static ensemble and coupling constants.

    Rates are in units of the inhomogeneous width ``w`` and times in ``1/w``
    unless a caller chooses otherwise; nothing here assumes ``w == 1``.
    ``tau`` is the dephasing waiting time and may be ``math.inf``.
    """

    w: float = 1.0
    tau: float = math.inf
    n_spins: float = 1.0
    g: float = 0.0

    def __post_init__(self) -> None:
        if not (self.w > 0 and math.isfinite(self.w)):
            raise InvalidParameterError("w", "must be positive and finite")
        if not self.tau > 0:
            raise InvalidParameterError("tau", "must be positive (math.inf allowed)")
        if not (self.n_spins >= 1 and math.isfinite(self.n_spins)):
            raise InvalidParameterError("n_spins", "must be a finite count >= 1")
        if not (self.g >= 0 and math.isfinite(self.g)):
            raise InvalidParameterError("g", "must be non-negative and finite")

    @classmethod
    def from_ensemble_coupling(
        cls,
        g_ens: float,
        *,
        n_spins: float,
        w: float = 1.0,
        tau: float = math.inf,
    ) -> "PhysicalParams":
        if g_ens < 0:
            raise InvalidParameterError("g_ens", "must be non-negative")
        return cls(w=w, tau=tau, n_spins=n_spins, g=g_ens / math.sqrt(n_spins))

    @property
    def gamma_perp(self) -> float:
        return 0.0 if math.isinf(self.tau) else 1.0 / self.tau

    @property
    def gamma(self) -> float:
        """Effective homogeneous linewidth of the collective mode."""
        return self.gamma_perp + self.w / 2

    @property
    def g_ens_sq(self) -> float:
        return self.n_spins * self.g * self.g

    @property
    def g_ens(self) -> float:
        return math.sqrt(self.g_ens_sq)

    @property
    def g_bar(self) -> float:
        return self.g

    def cooperativity(self, kappa: float) -> float:
        if kappa == 0:
            return math.inf if self.g_ens_sq > 0 else 0.0
        return self.g_ens_sq / (kappa * self.gamma)

    def with_gamma_perp(self, gamma_perp: float) -> "PhysicalParams":
        tau = math.inf if gamma_perp == 0 else 1.0 / gamma_perp
        return PhysicalParams(w=self.w, tau=tau, n_spins=self.n_spins, g=self.g)

    def with_ensemble_coupling(self, g_ens: float) -> "PhysicalParams":
        return PhysicalParams.from_ensemble_coupling(
            g_ens, n_spins=self.n_spins, w=self.w, tau=self.tau
        )


@dataclass(frozen=True, slots=True)
class DerivedRates:
    """Segment-dependent rates: cooperativities, correlated decay and Stark shift.

    ``delta_cs`` is the detuning of the segment the rates describe; for the
    suppressed cooperativity it plays the role of the inverted-period detuning.
    ``zeta`` is ``None`` for a resonant lossless cavity where it diverges.
    """

    cooperativity: float
    c_tilde: float
    gamma_p: float
    zeta: complex | None

    @classmethod
    def for_segment(
        cls, params: PhysicalParams, kappa: float, delta_cs: float
    ) -> "DerivedRates":
        if kappa < 0:
            raise InvalidParameterError("kappa", "must be non-negative")
        cooperativity = params.cooperativity(kappa)
        suppression = 1.0 + (delta_cs / (kappa + params.gamma)) ** 2
        c_tilde = cooperativity / suppression
        denominator = kappa * kappa + delta_cs * delta_cs
        if denominator == 0:
            return cls(cooperativity, c_tilde, 0.0, None)
        gamma_p = 2.0 * kappa * params.g * params.g / denominator
        zeta = params.g_ens_sq * complex(delta_cs, kappa) / denominator
        return cls(cooperativity, c_tilde, gamma_p, zeta)
