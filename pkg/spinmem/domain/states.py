from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from spinmem.domain.errors import InvalidParameterError
from spinmem.domain.grid import FrequencyGrid
from spinmem.domain.params import PhysicalParams

_BLOCH_TOLERANCE = 1e-9
VACUUM_VARIANCE = 0.5


def covariance_size(classes: int) -> int:
    return 2 + 3 * classes


def _uniform_class_mean(
    grid: FrequencyGrid, params: PhysicalParams, b0: complex
) -> complex:
    # b = Σ (pop_m/√N) s_m with identical s_m
    return complex(b0) / float(np.sum(grid.mode_weights(params)))


@dataclass(frozen=True, eq=False)
class LinearState:
    """Cavity mean plus per-spin class means with frozen polarization."""

    a_c: complex
    s_minus: NDArray[np.complex128]
    polarization: NDArray[np.float64]

    def __post_init__(self) -> None:
        if self.s_minus.shape != self.polarization.shape:
            raise InvalidParameterError("s_minus", "shape differs from polarization")
        if np.any(np.abs(self.s_minus) > 1 + _BLOCH_TOLERANCE):
            raise InvalidParameterError("s_minus", "per-spin coherence exceeds 1")
        if not np.all(np.abs(self.polarization) == 1):
            raise InvalidParameterError("polarization", "must be -1 or +1 per class")

    @classmethod
    def cavity_input(
        cls, grid: FrequencyGrid, alpha: complex, *, polarization: float = -1.0
    ) -> "LinearState":
        return cls(
            a_c=complex(alpha),
            s_minus=np.zeros(grid.size, dtype=np.complex128),
            polarization=np.full(grid.size, polarization),
        )

    @classmethod
    def coherent_spins(
        cls,
        grid: FrequencyGrid,
        params: PhysicalParams,
        b0: complex,
        *,
        polarization: float = -1.0,
    ) -> "LinearState":
        s = _uniform_class_mean(grid, params, b0)
        return cls(
            a_c=0j,
            s_minus=np.full(grid.size, s, dtype=np.complex128),
            polarization=np.full(grid.size, polarization),
        )

    def collective(self, grid: FrequencyGrid, params: PhysicalParams) -> complex:
        return complex(grid.collective(params, self.s_minus))


@dataclass(frozen=True, eq=False)
class SystemState:
    """Means and covariance over (X_c, P_c, Sx1, Sy1, Sz1, ..., SxM, SyM, SzM).

    ``bloch`` holds per-spin means; the covariance holds symmetrised central
    moments of class-collective operators. ``cov`` is ``None`` for runs that
    track means only.
    """

    a_c: complex
    bloch: NDArray[np.float64]
    cov: NDArray[np.float64] | None
    time: float = 0.0

    def __post_init__(self) -> None:
        if self.bloch.ndim != 2 or self.bloch.shape[1] != 3:
            raise InvalidParameterError("bloch", "expected shape (M, 3)")
        if np.any(np.einsum("mi,mi->m", self.bloch, self.bloch) > 1 + _BLOCH_TOLERANCE):
            raise InvalidParameterError("bloch", "Bloch vector longer than 1")
        if self.cov is not None:
            n = covariance_size(self.classes)
            if self.cov.shape != (n, n):
                raise InvalidParameterError("cov", f"expected shape ({n}, {n})")

    @property
    def classes(self) -> int:
        return int(self.bloch.shape[0])

    @property
    def s_minus(self) -> NDArray[np.complex128]:
        return 0.5 * (self.bloch[:, 0] - 1j * self.bloch[:, 1])

    @property
    def quadratures(self) -> tuple[float, float]:
        return math.sqrt(2) * self.a_c.real, math.sqrt(2) * self.a_c.imag

    @property
    def cavity_covariance(self) -> NDArray[np.float64]:
        if self.cov is None:
            raise InvalidParameterError("cov", "state carries means only")
        return self.cov[:2, :2]

    def collective(self, grid: FrequencyGrid, params: PhysicalParams) -> complex:
        return complex(grid.collective(params, self.s_minus))

    def excitation(self, grid: FrequencyGrid) -> float:
        weights = grid.populations / np.sum(grid.populations)
        return float(np.clip(np.dot(weights, (1 + self.bloch[:, 2]) / 2), 0.0, 1.0))

    def replace(
        self,
        *,
        a_c: complex | None = None,
        bloch: NDArray[np.float64] | None = None,
        cov: NDArray[np.float64] | None = None,
        time: float | None = None,
        drop_covariance: bool = False,
    ) -> "SystemState":
        return SystemState(
            a_c=self.a_c if a_c is None else complex(a_c),
            bloch=self.bloch if bloch is None else bloch,
            cov=None if drop_covariance else (self.cov if cov is None else cov),
            time=self.time if time is None else time,
        )

    def to_linear(self) -> LinearState:
        polarization = np.where(self.bloch[:, 2] > 0, 1.0, -1.0)
        return LinearState(a_c=self.a_c, s_minus=self.s_minus, polarization=polarization)

    @classmethod
    def from_bloch(
        cls,
        grid: FrequencyGrid,
        a_c: complex,
        bloch: NDArray[np.float64],
        *,
        with_covariance: bool = True,
    ) -> "SystemState":
        """Coherent cavity and coherent (product) spin state around given means."""
        cov = None
        if with_covariance:
            cov = np.zeros((covariance_size(grid.size),) * 2)
            cov[0, 0] = cov[1, 1] = VACUUM_VARIANCE
            blocks = np.eye(3)[None, :, :] - np.einsum("mi,mj->mij", bloch, bloch)
            blocks *= grid.populations[:, None, None]
            for m in range(grid.size):
                lo = 2 + 3 * m
                cov[lo : lo + 3, lo : lo + 3] = blocks[m]
        return cls(a_c=complex(a_c), bloch=np.array(bloch, dtype=np.float64), cov=cov)

    @classmethod
    def from_linear(
        cls, grid: FrequencyGrid, state: LinearState, *, with_covariance: bool = True
    ) -> "SystemState":
        sx = 2.0 * state.s_minus.real
        sy = -2.0 * state.s_minus.imag
        sz = state.polarization * np.sqrt(np.clip(1.0 - sx * sx - sy * sy, 0.0, None))
        bloch = np.column_stack([sx, sy, sz])
        return cls.from_bloch(grid, state.a_c, bloch, with_covariance=with_covariance)

    @classmethod
    def ground(
        cls, grid: FrequencyGrid, alpha: complex = 0j, *, with_covariance: bool = True
    ) -> "SystemState":
        return cls.from_linear(
            grid, LinearState.cavity_input(grid, alpha), with_covariance=with_covariance
        )

    @classmethod
    def inverted(
        cls, grid: FrequencyGrid, alpha: complex = 0j, *, with_covariance: bool = True
    ) -> "SystemState":
        return cls.from_linear(
            grid,
            LinearState.cavity_input(grid, alpha, polarization=1.0),
            with_covariance=with_covariance,
        )

    @classmethod
    def coherent_spins(
        cls,
        grid: FrequencyGrid,
        params: PhysicalParams,
        b0: complex,
        *,
        inverted: bool = False,
        with_covariance: bool = True,
    ) -> "SystemState":
        linear = LinearState.coherent_spins(
            grid, params, b0, polarization=1.0 if inverted else -1.0
        )
        return cls.from_linear(grid, linear, with_covariance=with_covariance)


@dataclass(frozen=True, slots=True)
class NoiseObservables:
    time: float
    resn: float
    ren: float
    excitation: float
