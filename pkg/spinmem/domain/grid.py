from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import NDArray

from spinmem.domain.errors import GridResolutionError
from spinmem.domain.params import PhysicalParams

logger = logging.getLogger(__name__)

Normalization = Literal["renormalized", "lorentzian"]

# 建议的最小截断倍数（相对于 Γ）
RECOMMENDED_CUT_OVER_GAMMA = 10.0
# 时间分辨率安全系数：dΔ ≤ 2π / (4·T_mem)
REVIVAL_SAFETY_FACTOR = 4.0


def lorentzian_density(delta: NDArray[np.float64], w: float) -> NDArray[np.float64]:
    half = w / 2
    return (half / math.pi) / (delta * delta + half * half)


def auto_d_delta(t_mem: float) -> float:
    if t_mem <= 0:
        raise GridResolutionError("t_mem must be positive to derive a grid spacing")
    return 2.0 * math.pi / (REVIVAL_SAFETY_FACTOR * t_mem)


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    """Spin classes sampled from the truncated Lorentzian.

    ``reduced_width`` is an extra transverse decay carried by every class;
    it is zero for sampled grids and ``w/2`` for the homogeneous-equivalent
    single class.
    """

    delta_cut: float
    d_delta: float
    deltas: NDArray[np.float64]
    weights: NDArray[np.float64]
    populations: NDArray[np.float64]
    normalization: Normalization
    raw_weight_sum: float
    lorentzian_mass: float
    reduced_width: float = 0.0

    @property
    def size(self) -> int:
        return int(self.deltas.shape[0])

    @property
    def revival_time(self) -> float:
        return math.inf if self.d_delta == 0 else 2.0 * math.pi / self.d_delta

    @property
    def is_homogeneous(self) -> bool:
        return self.size == 1

    @property
    def classes(self) -> list[tuple[float, float, float]]:
        return [
            (float(d), float(wt), float(p))
            for d, wt, p in zip(self.deltas, self.weights, self.populations)
        ]

    def mode_weights(self, params: PhysicalParams) -> NDArray[np.float64]:
        """Coefficients ``g*pop_m/g_ens`` of the collective mode ``b``."""
        return self.populations / math.sqrt(params.n_spins)

    def class_couplings(self, params: PhysicalParams) -> NDArray[np.float64]:
        """Class-collective couplings ``G_m = g*pop_m`` into the cavity equation."""
        return params.g * self.populations

    def transverse_decay(self, params: PhysicalParams) -> NDArray[np.float64]:
        return np.full(self.size, params.gamma_perp + self.reduced_width)

    def collective(
        self, params: PhysicalParams, s_minus: NDArray[np.complex128]
    ) -> complex | NDArray[np.complex128]:
        """Collective mean ``b`` from per-spin class means (last axis = classes)."""
        return np.asarray(s_minus) @ self.mode_weights(params)

    def check_resolution(self, t_mem: float) -> None:
        if self.is_homogeneous:
            return
        limit = auto_d_delta(t_mem)
        if self.d_delta > limit * (1 + 1e-12):
            raise GridResolutionError(
                f"d_delta={self.d_delta:.6g} exceeds 2π/(4·t_mem)={limit:.6g}; "
                f"artificial revival at t={self.revival_time:.6g}"
            )


def build_frequency_grid(
    params: PhysicalParams,
    delta_cut: float,
    d_delta: float,
    *,
    normalization: Normalization = "renormalized",
    homogeneous_width: float | None = None,
) -> FrequencyGrid:
    """Discretise the Lorentzian into ``2*floor(delta_cut/d_delta)+1`` classes.

    ``delta_cut == 0`` selects the homogeneous-equivalent single class at
    ``delta = 0`` whose decay carries the Lorentzian half width.
    """
    if delta_cut == 0:
        width = params.w / 2 if homogeneous_width is None else homogeneous_width
        if width < 0:
            raise GridResolutionError("homogeneous_width must be non-negative")
        one = np.ones(1)
        return _freeze(
            FrequencyGrid(
                delta_cut=0.0,
                d_delta=0.0,
                deltas=np.zeros(1),
                weights=one,
                populations=one * params.n_spins,
                normalization=normalization,
                raw_weight_sum=1.0,
                lorentzian_mass=1.0,
                reduced_width=width,
            )
        )
    if not d_delta > 0:
        raise GridResolutionError("d_delta must be positive")
    if delta_cut < d_delta:
        raise GridResolutionError(
            f"delta_cut={delta_cut:.6g} is smaller than d_delta={d_delta:.6g}"
        )
    if delta_cut < RECOMMENDED_CUT_OVER_GAMMA * params.gamma:
        logger.warning(
            "[event=grid_cut_low] delta_cut below 10·Γ",
            extra={"extra": {"delta_cut": delta_cut, "gamma": params.gamma}},
        )

    half_count = math.floor(delta_cut / d_delta * (1 + 1e-12))
    index = np.arange(-half_count, half_count + 1, dtype=np.float64)
    deltas = index * d_delta
    raw = lorentzian_density(deltas, params.w) * d_delta
    raw_sum = math.fsum(raw.tolist())
    weights = raw / raw_sum if normalization == "renormalized" else raw
    grid = FrequencyGrid(
        delta_cut=float(delta_cut),
        d_delta=float(d_delta),
        deltas=deltas,
        weights=weights,
        populations=params.n_spins * weights,
        normalization=normalization,
        raw_weight_sum=raw_sum,
        lorentzian_mass=(2.0 / math.pi) * math.atan(2.0 * delta_cut / params.w),
    )
    logger.debug(
        "[event=grid_built]",
        extra={
            "extra": {
                "classes": grid.size,
                "d_delta": d_delta,
                "delta_cut": delta_cut,
                "normalization": normalization,
            }
        },
    )
    return _freeze(grid)


def _freeze(grid: FrequencyGrid) -> FrequencyGrid:
    for array in (grid.deltas, grid.weights, grid.populations):
        array.setflags(write=False)
    return grid
