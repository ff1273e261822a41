"""Input-output map of the memory: gain map fit, variances and qubit fidelity.

Quadratures are ``X = √2 Re a`` and ``P = √2 Im a``. The map relates the
inverted output ``(-X_out, -P_out)`` to the input, so an ideal memory is the
identity.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from spinmem.domain import NoiseObservables
from spinmem.services.base import DegenerateFitError

logger = logging.getLogger(__name__)

# 主轴与协方差本征方向允许的最大偏差
AXIS_MISMATCH_LIMIT = math.radians(3.0)
# 相对差小于该值时视为 G1 = G2
DEGENERATE_GAIN_TOLERANCE = 1e-6

__all__ = [
    "GainMap",
    "RunResult",
    "axis_mismatch",
    "fit_gain_decay",
    "fit_io_map",
    "fit_noise_slope",
    "principal_variances",
    "qubit_fidelity",
    "qubit_fidelity_symmetric",
    "quadratures",
    "variance_along",
]


def _rotation(theta: float) -> NDArray[np.float64]:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def _wrap(angle: float) -> float:
    """Map onto (-π, π]."""
    wrapped = math.remainder(angle, 2.0 * math.pi)
    return math.pi if wrapped == -math.pi else wrapped


@dataclass(frozen=True, slots=True)
class GainMap:
    theta0: float
    theta1: float
    g1: float
    g2: float

    @property
    def theta(self) -> float:
        return self.theta1 - self.theta0

    @property
    def gain(self) -> float:
        return 0.5 * (self.g1 + self.g2)

    def matrix(self) -> NDArray[np.float64]:
        return _rotation(self.theta1) @ np.diag([self.g1, self.g2]) @ _rotation(-self.theta0)

    def apply(self, x_in: float, p_in: float) -> tuple[float, float]:
        """Output quadratures ``(X_out, P_out)`` for a given input."""
        minus_out = self.matrix() @ np.array([x_in, p_in])
        return float(-minus_out[0]), float(-minus_out[1])


def quadratures(amplitude: complex) -> tuple[float, float]:
    return math.sqrt(2.0) * amplitude.real, math.sqrt(2.0) * amplitude.imag


def fit_io_map(
    pairs: Sequence[tuple[tuple[float, float], tuple[float, float]]],
    *,
    degenerate_tolerance: float = DEGENERATE_GAIN_TOLERANCE,
) -> GainMap:
    """Least-squares map ``(X_in, P_in) -> (-X_out, -P_out)``.

    The fitted matrix is factored as R(θ₁)·diag(G₁, G₂)·R(-θ₀).

    ``pairs`` holds ``((X_in, P_in), (X_out, P_out))``. Angles are fixed by
    θ₁ ∈ (-π/2, π/2] and θ₀ ∈ (-π, π]; equal gains give θ₁ = 0.
    """
    if not pairs:
        raise DegenerateFitError("no input/output pairs")
    inputs = np.array([p[0] for p in pairs], dtype=np.float64)
    outputs = -np.array([p[1] for p in pairs], dtype=np.float64)
    if inputs.shape[0] < 2 or np.linalg.matrix_rank(inputs, tol=1e-12) < 2:
        raise DegenerateFitError("inputs must span at least two independent directions")
    solution, *_ = np.linalg.lstsq(inputs, outputs, rcond=None)
    matrix = solution.T

    u, s, vt = np.linalg.svd(matrix)
    v = vt.T
    gains = s.copy()
    if np.linalg.det(u) < 0:
        u[:, 1] *= -1
        gains[1] *= -1
    if np.linalg.det(v) < 0:
        v[:, 1] *= -1
        gains[1] *= -1

    if gains[0] == 0 or abs(gains[0] - gains[1]) <= degenerate_tolerance * abs(gains[0]):
        theta = math.atan2(matrix[1, 0] - matrix[0, 1], matrix[0, 0] + matrix[1, 1])
        return GainMap(theta0=_wrap(-theta), theta1=0.0, g1=float(gains[0]), g2=float(gains[1]))

    theta1 = math.atan2(u[1, 0], u[0, 0])
    theta0 = math.atan2(v[1, 0], v[0, 0])
    if theta1 > math.pi / 2:
        theta1 -= math.pi
        theta0 -= math.pi
    elif theta1 <= -math.pi / 2:
        theta1 += math.pi
        theta0 += math.pi
    return GainMap(
        theta0=_wrap(theta0), theta1=theta1, g1=float(gains[0]), g2=float(gains[1])
    )


def variance_along(cov: ArrayLike, theta: float) -> float:
    """Variance of ``X cosθ + P sinθ`` for a 2×2 cavity covariance block."""
    block = np.asarray(cov, dtype=np.float64)
    c, s = math.cos(theta), math.sin(theta)
    return float(c * c * block[0, 0] + s * s * block[1, 1] + 2.0 * s * c * block[0, 1])


def principal_variances(cov: ArrayLike, gain_map: GainMap) -> tuple[float, float]:
    """``(σ₁², σ₂²)`` along the major and minor axes of the mean map."""
    return (
        variance_along(cov, gain_map.theta1),
        variance_along(cov, gain_map.theta1 + math.pi / 2),
    )


def axis_mismatch(cov: ArrayLike, gain_map: GainMap, *, isotropy: float = 1e-6) -> float:
    """Angle between the covariance eigen-axes and the mean-map axes, modulo π/2.

    Zero when the covariance is isotropic (no preferred axes).
    """
    block = np.asarray(cov, dtype=np.float64)
    eigenvalues, eigenvectors = np.linalg.eigh(0.5 * (block + block.T))
    if eigenvalues[1] - eigenvalues[0] <= isotropy * max(abs(eigenvalues[1]), 1e-300):
        return 0.0
    major = math.atan2(eigenvectors[1, 1], eigenvectors[0, 1])
    quarter = math.pi / 2
    offset = math.remainder(major - gain_map.theta1, quarter)
    return abs(offset)


def qubit_fidelity(gain_map: GainMap, sigma1_sq: float, sigma2_sq: float) -> float:
    """Average fidelity of a Fock-state qubit sent through the Gaussian map."""
    if sigma1_sq <= 0 or sigma2_sq <= 0:
        raise ValueError("variances must be positive")
    g1, g2 = gain_map.g1, gain_map.g2
    a = sigma1_sq + 0.5
    b = sigma2_sq + 0.5
    bracket = (
        3.0
        + 3.0 * (sigma1_sq * sigma2_sq - 0.25) / (a * b)
        + g1 / a
        + g2 / b
        - g1 * g1 * (sigma1_sq - 1.0) / (a * a)
        - g2 * g2 * (sigma2_sq - 1.0) / (b * b)
        - (g1 * g1 * (sigma2_sq - 0.5) + g2 * g2 * (sigma1_sq - 0.5)) / (2.0 * a * b)
    )
    return bracket / (6.0 * math.sqrt(a * b))


def qubit_fidelity_symmetric(gain: float, sigma_sq: float) -> float:
    """Same fidelity for ``G₁ = G₂ = G`` and ``σ₁² = σ₂² = σ²``."""
    if sigma_sq <= 0:
        raise ValueError("variance must be positive")
    a = sigma_sq + 0.5
    return (
        3.0
        + (3.0 * sigma_sq - 1.5 + 2.0 * gain) / a
        - gain * gain * (3.0 * sigma_sq - 2.5) / (a * a)
    ) / (6.0 * a)


def _linear_fit(x: NDArray[np.float64], y: NDArray[np.float64], what: str) -> tuple[float, float]:
    if x.size < 3:
        raise DegenerateFitError(f"{what} needs at least 3 points, got {x.size}")
    if np.ptp(x) == 0:
        raise DegenerateFitError(f"{what} needs distinct dephasing rates")
    slope, intercept = np.polyfit(x, y, 1)
    return float(slope), float(intercept)


def fit_gain_decay(
    points: Sequence[tuple[float, float]], t_mem: float
) -> tuple[float, float]:
    """Fit ``G = G0·exp(-γ⊥(T_mem - T0))``; returns ``(G0, T0)``."""
    rates = np.array([p[0] for p in points], dtype=np.float64)
    gains = np.array([p[1] for p in points], dtype=np.float64)
    if np.any(gains <= 0):
        raise DegenerateFitError("gains must be positive for a log-linear fit")
    slope, intercept = _linear_fit(rates, np.log(gains), "gain decay fit")
    return math.exp(intercept), t_mem + slope


def fit_noise_slope(points: Sequence[tuple[float, float]]) -> float:
    """Slope of the excess noise against the dephasing rate, ``∂REN/∂γ⊥``."""
    rates = np.array([p[0] for p in points], dtype=np.float64)
    noise = np.array([p[1] for p in points], dtype=np.float64)
    slope, _ = _linear_fit(rates, noise, "noise slope fit")
    return slope


@dataclass(frozen=True)
class RunResult:
    gain_map: GainMap
    sigma1_sq: float
    sigma2_sq: float
    p_exc_end: float
    f_q: float
    resn_series: tuple[NoiseObservables, ...] = ()
    diagnostics: tuple[str, ...] = field(default_factory=tuple)

    @property
    def sigma_sq(self) -> float:
        return 0.5 * (self.sigma1_sq + self.sigma2_sq)

    @property
    def gain_avg(self) -> float:
        return self.gain_map.gain

    @property
    def ren(self) -> float:
        return 2.0 * self.sigma_sq - 1.0

    def to_record(self) -> dict[str, Any]:
        return {
            "theta0": self.gain_map.theta0,
            "theta1": self.gain_map.theta1,
            "theta": self.gain_map.theta,
            "g1": self.gain_map.g1,
            "g2": self.gain_map.g2,
            "gain": self.gain_avg,
            "sigma1_sq": self.sigma1_sq,
            "sigma2_sq": self.sigma2_sq,
            "sigma_sq": self.sigma_sq,
            "ren": self.ren,
            "p_exc_end": self.p_exc_end,
            "f_q": self.f_q,
            "diagnostics": list(self.diagnostics),
        }
