"""Mean-field Maxwell-Bloch evolution with Gaussian covariance propagation.

Covariance basis: ``(X_c, P_c, Sx1, Sy1, Sz1, ..., SxM, SyM, SzM)`` with
``X = (a + a†)/√2``, ``P = -i(a - a†)/√2`` and class-collective spin
operators. The covariance obeys ``dC/dt = J C + C Jᵀ + D`` where ``J`` is the
drift Jacobian at the instantaneous means and ``D`` holds the cavity input
noise (``kappa`` on both quadratures) and the dephasing noise
(``2*gamma_m*pop_m`` on each transverse class quadrature).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Literal, Union

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import OdeSolution
from scipy.linalg import expm

from spinmem.domain import CavitySegment, FrequencyGrid, PhysicalParams, SystemState
from spinmem.domain.states import NoiseObservables, covariance_size
from spinmem.infra.integrator import IntegratorSettings, integrate
from spinmem.services.base import (
    CovarianceNotPSDError,
    MemoryBudgetError,
    translate_integration_failures,
)

logger = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)
DEFAULT_PSD_TOLERANCE = 1e-9
_STATIONARY_TOLERANCE = 1e-14
_STATIONARY_CHUNK = 4.0
DEFAULT_MEMORY_BUDGET = 8.0 * 2**30

PropagationPath = Literal["integrate", "stationary", "decoupled"]

# 各路径驻留的 n×n 矩阵份数；Van Loan 含 2n 块与 expm 工作区
_SOLVER_COPIES = {"DOP853": 31, "RK45": 22}
_PATH_COPIES = {"stationary": 44, "decoupled": 6}

__all__ = [
    "CavityDrive",
    "ExternalDrive",
    "MomentTrajectory",
    "PrescribedField",
    "check_memory_budget",
    "check_psd",
    "covariance_footprint",
    "diffusion_diagonal",
    "drift_jacobian",
    "evolve_moments",
    "noise_observables",
]


@dataclass(frozen=True)
class ExternalDrive:
    """External field ``beta(t)`` entering the cavity through ``sqrt(2*kappa)``."""

    beta: Callable[[float], complex]


@dataclass(frozen=True)
class PrescribedField:
    """Cavity mean pinned to ``target`` plus the freely decaying initial residual."""

    target: Callable[[float], complex]
    derivative: Callable[[float], complex]


CavityDrive = Union[ExternalDrive, PrescribedField]


@dataclass(frozen=True, eq=False)
class MomentTrajectory:
    times: NDArray[np.float64]
    a_c: NDArray[np.complex128]
    bloch: NDArray[np.float64]
    """Shape ``(len(times), M, 3)``."""
    observables: tuple[NoiseObservables, ...]
    cavity_cov: NDArray[np.float64] | None
    final: SystemState
    dense: OdeSolution | None = None

    def collective(self, grid: FrequencyGrid, params: PhysicalParams) -> NDArray[np.complex128]:
        s_minus = 0.5 * (self.bloch[:, :, 0] - 1j * self.bloch[:, :, 1])
        return np.asarray(grid.collective(params, s_minus), dtype=np.complex128)

    def excitation(self, grid: FrequencyGrid) -> NDArray[np.float64]:
        weights = grid.populations / np.sum(grid.populations)
        return np.clip((1 + self.bloch[:, :, 2]) / 2 @ weights, 0.0, 1.0)

    def records(
        self, grid: FrequencyGrid, params: PhysicalParams
    ) -> list[tuple[float, ...]]:
        """Columnar rows ``(t, resn, ren, p_exc, Re a_c, Im a_c, Re b, Im b)``."""
        b = self.collective(grid, params)
        p_exc = self.excitation(grid)
        rows = []
        for k, t in enumerate(self.times):
            resn = self.observables[k].resn if self.observables else math.nan
            ren = self.observables[k].ren if self.observables else math.nan
            rows.append(
                (
                    float(t),
                    resn,
                    ren,
                    float(p_exc[k]),
                    float(self.a_c[k].real),
                    float(self.a_c[k].imag),
                    float(b[k].real),
                    float(b[k].imag),
                )
            )
        return rows


@dataclass(frozen=True)
class _Model:
    """Per-segment constants shared by the drift, Jacobian and diffusion."""

    kappa: float
    delta_cs: float
    coupling: float
    gamma: NDArray[np.float64]
    deltas: NDArray[np.float64]
    populations: NDArray[np.float64]
    class_couplings: NDArray[np.float64]

    @classmethod
    def build(
        cls, segment: CavitySegment, grid: FrequencyGrid, params: PhysicalParams
    ) -> "_Model":
        coupling = params.g if segment.coupled else 0.0
        return cls(
            kappa=segment.kappa,
            delta_cs=segment.delta_cs,
            coupling=coupling,
            gamma=grid.transverse_decay(params),
            deltas=np.asarray(grid.deltas),
            populations=np.asarray(grid.populations),
            class_couplings=coupling * np.asarray(grid.populations),
        )

    @property
    def classes(self) -> int:
        return int(self.deltas.shape[0])

    def mean_drift(
        self, t: float, a: complex, bloch: NDArray[np.float64], drive: CavityDrive | None
    ) -> tuple[complex, NDArray[np.float64]]:
        sx, sy, sz = bloch[:, 0], bloch[:, 1], bloch[:, 2]
        cavity_rate = complex(self.kappa, self.delta_cs)
        if isinstance(drive, PrescribedField):
            target = drive.target(t)
            da = drive.derivative(t) - cavity_rate * (a - target)
        else:
            s_minus = 0.5 * (sx - 1j * sy)
            da = -cavity_rate * a - 1j * np.dot(self.class_couplings, s_minus)
            if isinstance(drive, ExternalDrive):
                da += math.sqrt(2.0 * self.kappa) * drive.beta(t)
        two_g = 2.0 * self.coupling
        dbloch = np.empty_like(bloch)
        dbloch[:, 0] = -self.gamma * sx - self.deltas * sy - two_g * sz * a.imag
        dbloch[:, 1] = self.deltas * sx - self.gamma * sy - two_g * sz * a.real
        dbloch[:, 2] = two_g * (a.real * sy + a.imag * sx)
        return complex(da), dbloch

    def spin_blocks(self, a: complex) -> NDArray[np.float64]:
        two_g = 2.0 * self.coupling
        blocks = np.zeros((self.classes, 3, 3))
        blocks[:, 0, 0] = blocks[:, 1, 1] = -self.gamma
        blocks[:, 0, 1] = -self.deltas
        blocks[:, 1, 0] = self.deltas
        blocks[:, 0, 2] = -two_g * a.imag
        blocks[:, 1, 2] = -two_g * a.real
        blocks[:, 2, 0] = two_g * a.imag
        blocks[:, 2, 1] = two_g * a.real
        return blocks

    def spin_from_cavity(self, bloch: NDArray[np.float64]) -> NDArray[np.float64]:
        """``d(Sx, Sy, Sz)_m / d(X, P)``, shape ``(M, 3, 2)``."""
        scale = SQRT2 * self.coupling * self.populations
        block = np.zeros((self.classes, 3, 2))
        block[:, 0, 1] = -scale * bloch[:, 2]
        block[:, 1, 0] = -scale * bloch[:, 2]
        block[:, 2, 0] = scale * bloch[:, 1]
        block[:, 2, 1] = scale * bloch[:, 0]
        return block

    def diffusion(self) -> NDArray[np.float64]:
        diag = np.zeros(covariance_size(self.classes))
        diag[0] = diag[1] = self.kappa
        spin = 2.0 * self.gamma * self.populations
        diag[2::3] = spin
        diag[3::3] = spin
        return diag

    def jacobian_product(
        self, a: complex, bloch: NDArray[np.float64], cov: NDArray[np.float64]
    ) -> NDArray[np.float64]:
        """``J @ cov`` using the cavity/class block structure of ``J``."""
        n = cov.shape[0]
        cavity_rows = cov[:2]
        spin_rows = cov[2:].reshape(self.classes, 3, n)
        product = np.empty_like(cov)
        lateral = self.coupling / SQRT2
        product[0] = (
            -self.kappa * cavity_rows[0]
            + self.delta_cs * cavity_rows[1]
            - lateral * spin_rows[:, 1, :].sum(axis=0)
        )
        product[1] = (
            -self.delta_cs * cavity_rows[0]
            - self.kappa * cavity_rows[1]
            - lateral * spin_rows[:, 0, :].sum(axis=0)
        )
        spins = np.matmul(self.spin_blocks(a), spin_rows)
        spins += np.matmul(self.spin_from_cavity(bloch), cavity_rows)
        product[2:] = spins.reshape(3 * self.classes, n)
        return product

    def jacobian(self, a: complex, bloch: NDArray[np.float64]) -> NDArray[np.float64]:
        n = covariance_size(self.classes)
        jac = np.zeros((n, n))
        jac[0, 0] = jac[1, 1] = -self.kappa
        jac[0, 1] = self.delta_cs
        jac[1, 0] = -self.delta_cs
        lateral = self.coupling / SQRT2
        jac[0, 3::3] = -lateral
        jac[1, 2::3] = -lateral
        blocks = self.spin_blocks(a)
        from_cavity = self.spin_from_cavity(bloch)
        for m in range(self.classes):
            lo = 2 + 3 * m
            jac[lo : lo + 3, lo : lo + 3] = blocks[m]
            jac[lo : lo + 3, :2] = from_cavity[m]
        return jac


def drift_jacobian(
    state: SystemState, segment: CavitySegment, grid: FrequencyGrid, params: PhysicalParams
) -> NDArray[np.float64]:
    """Dense drift Jacobian at the state's means."""
    return _Model.build(segment, grid, params).jacobian(state.a_c, state.bloch)


def diffusion_diagonal(
    segment: CavitySegment, grid: FrequencyGrid, params: PhysicalParams
) -> NDArray[np.float64]:
    return _Model.build(segment, grid, params).diffusion()


def covariance_footprint(
    classes: int, path: PropagationPath = "integrate", method: str = "DOP853"
) -> int:
    """Estimated peak bytes held by a covariance run over ``classes`` classes."""
    n = covariance_size(classes)
    copies = _SOLVER_COPIES.get(method, max(_SOLVER_COPIES.values()))
    if path != "integrate":
        copies = _PATH_COPIES[path]
    return copies * n * n * 8


def check_memory_budget(
    classes: int,
    budget: float,
    path: PropagationPath | None = None,
    method: str = "DOP853",
) -> int:
    """Raise :class:`MemoryBudgetError` when ``path`` (default: the costliest) overflows."""
    paths: tuple[PropagationPath, ...] = (
        ("integrate", "stationary", "decoupled") if path is None else (path,)
    )
    required = max(covariance_footprint(classes, p, method) for p in paths)
    if required > budget:
        raise MemoryBudgetError(classes, float(required), float(budget))
    return required


def check_psd(cov: NDArray[np.float64], time: float, tolerance: float) -> float:
    """Return the smallest eigenvalue; raise when it falls below ``-tolerance*trace``."""
    eigenvalues = np.linalg.eigvalsh(cov)
    trace = float(np.trace(cov))
    smallest = float(eigenvalues[0])
    if smallest < -tolerance * max(trace, 1.0):
        raise CovarianceNotPSDError(smallest, trace, time)
    return smallest


def noise_observables(
    state: SystemState, grid: FrequencyGrid, params: PhysicalParams
) -> NoiseObservables:
    """RESN over the whole ensemble, REN of the cavity and mean excitation."""
    if state.cov is None:
        raise ValueError("noise observables need a covariance")
    return _observables(state.time, state.bloch, state.cov, grid)


def _observables(
    time: float, bloch: NDArray[np.float64], cov: NDArray[np.float64], grid: FrequencyGrid
) -> NoiseObservables:
    total = float(np.sum(grid.populations))
    var_sx = float(cov[2::3, 2::3].sum())
    var_sy = float(cov[3::3, 3::3].sum())
    resn = (var_sx + var_sy) / (2.0 * total) - 1.0
    ren = float(cov[0, 0] + cov[1, 1]) - 1.0
    weights = grid.populations / total
    excitation = float(np.clip(np.dot(weights, (1 + bloch[:, 2]) / 2), 0.0, 1.0))
    return NoiseObservables(time=time, resn=resn, ren=ren, excitation=excitation)


def _pack(state: SystemState) -> NDArray[np.float64]:
    parts = [np.array([state.a_c.real, state.a_c.imag]), state.bloch.ravel()]
    if state.cov is not None:
        parts.append(state.cov.ravel())
    return np.concatenate(parts)


def _unpack(
    y: NDArray[np.float64], classes: int, with_cov: bool
) -> tuple[complex, NDArray[np.float64], NDArray[np.float64] | None]:
    means_end = 2 + 3 * classes
    a = complex(y[0], y[1])
    bloch = y[2:means_end].reshape(classes, 3)
    cov = None
    if with_cov:
        n = covariance_size(classes)
        cov = y[means_end:].reshape(n, n)
    return a, bloch, cov


def evolve_moments(
    state: SystemState,
    segment: CavitySegment,
    grid: FrequencyGrid,
    params: PhysicalParams,
    *,
    drive: CavityDrive | None = None,
    t_eval: NDArray[np.float64] | None = None,
    dense: bool = False,
    settings: IntegratorSettings | None = None,
    psd_tolerance: float = DEFAULT_PSD_TOLERANCE,
    exact_propagation: bool = True,
    memory_budget: float = DEFAULT_MEMORY_BUDGET,
) -> MomentTrajectory:
    """Evolve means (and covariance, if the state carries one) over a segment.

    Segment time runs from 0 to ``segment.duration``; the returned states are
    stamped with ``state.time + t``. Drive-free hard-decoupled segments and
    segments with stationary means are propagated exactly unless
    ``exact_propagation`` is off or dense output is requested. Covariance runs
    whose estimated working set exceeds ``memory_budget`` bytes raise
    :class:`MemoryBudgetError` before propagation starts.
    """
    settings = settings or IntegratorSettings()
    model = _Model.build(segment, grid, params)
    with_cov = state.cov is not None
    if dense and with_cov:
        raise ValueError("dense output is only available for means-only runs")
    samples = np.array([] if t_eval is None else t_eval, dtype=np.float64)
    samples = samples[(samples >= 0) & (samples < segment.duration)]

    path: PropagationPath = "integrate"
    if exact_propagation and drive is None and not dense:
        if not segment.coupled:
            path = "decoupled"
        elif with_cov and _means_stationary(state, model):
            path = "stationary"
    if with_cov:
        check_memory_budget(grid.size, memory_budget, path, settings.method)

    if path == "decoupled":
        return _propagate_decoupled(state, model, grid, samples, segment.duration)
    if path == "stationary":
        return _propagate_stationary(
            state, model, grid, samples, segment.duration, psd_tolerance
        )

    classes = grid.size
    means_end = 2 + 3 * classes

    def rhs(t: float, y: NDArray[np.float64]) -> NDArray[np.float64]:
        a, bloch, cov = _unpack(y, classes, with_cov)
        da, dbloch = model.mean_drift(t, a, bloch, drive)
        out = np.empty_like(y)
        out[0], out[1] = da.real, da.imag
        out[2:means_end] = dbloch.ravel()
        if cov is not None:
            product = model.jacobian_product(a, bloch, cov)
            dcov = product + product.T
            dcov[np.diag_indices_from(dcov)] += model.diffusion()
            out[means_end:] = dcov.ravel()
        return out

    def symmetrize(_t: float, y: NDArray[np.float64]) -> None:
        if with_cov:
            n = covariance_size(classes)
            cov = y[means_end:].reshape(n, n)
            cov[...] = 0.5 * (cov + cov.T)

    def observe(t: float, y: NDArray[np.float64]) -> NDArray[np.float64]:
        return _reduce_state(state.time + t, *_unpack(y, classes, with_cov), grid)

    with translate_integration_failures():
        trajectory = integrate(
            rhs,
            (0.0, segment.duration),
            _pack(state),
            settings,
            t_eval=samples,
            dense=dense,
            after_step=symmetrize,
            observe=observe,
            model="moments" if with_cov else "mean_field",
        )

    a_end, bloch_end, cov_end = _unpack(trajectory.final_state, classes, with_cov)
    end_time = state.time + segment.duration
    if cov_end is not None:
        cov_end = 0.5 * (cov_end + cov_end.T)
        check_psd(cov_end, end_time, psd_tolerance)
    final = SystemState(
        a_c=a_end, bloch=np.array(bloch_end), cov=cov_end, time=end_time
    )
    return _from_reduced(
        state.time, trajectory.times, trajectory.values, classes, final, trajectory.dense
    )


def _from_reduced(
    start: float,
    times: NDArray[np.float64],
    values: NDArray[np.float64],
    classes: int,
    final: SystemState,
    dense: OdeSolution | None,
) -> MomentTrajectory:
    means_end = 2 + 3 * classes
    a_c = values[:, 0] + 1j * values[:, 1]
    bloch = values[:, 2:means_end].reshape(len(times), classes, 3)
    observables: tuple[NoiseObservables, ...] = ()
    cavity_cov = None
    if values.shape[1] > means_end:
        extra = values[:, means_end:]
        observables = tuple(
            NoiseObservables(time=start + float(t), resn=row[0], ren=row[1], excitation=row[2])
            for t, row in zip(times, extra)
        )
        cavity_cov = extra[:, 3:7].reshape(len(times), 2, 2)
    return MomentTrajectory(
        times=start + times,
        a_c=a_c,
        bloch=bloch,
        observables=observables,
        cavity_cov=cavity_cov,
        final=final,
        dense=dense,
    )


def _means_stationary(state: SystemState, model: _Model) -> bool:
    da, dbloch = model.mean_drift(0.0, state.a_c, state.bloch, None)
    scale = 1.0 + abs(state.a_c) + float(np.abs(state.bloch).max(initial=0.0))
    drift = max(abs(da), float(np.abs(dbloch).max(initial=0.0)))
    return drift <= _STATIONARY_TOLERANCE * scale


def _reduce_state(
    time: float,
    a: complex,
    bloch: NDArray[np.float64],
    cov: NDArray[np.float64] | None,
    grid: FrequencyGrid,
) -> NDArray[np.float64]:
    reduced = [np.array([a.real, a.imag]), bloch.ravel()]
    if cov is not None:
        obs = _observables(time, bloch, cov, grid)
        reduced.append(np.array([obs.resn, obs.ren, obs.excitation]))
        reduced.append(cov[:2, :2].ravel())
    return np.concatenate(reduced)


def _decoupled_maps(
    model: _Model, t: float
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """Cavity map, per-class spin maps and the accumulated noise diagonal."""
    cavity_decay = math.exp(-model.kappa * t)
    c, s = math.cos(model.delta_cs * t), math.sin(model.delta_cs * t)
    cavity = cavity_decay * np.array([[c, s], [-s, c]])
    decay = np.exp(-model.gamma * t)
    cos_d, sin_d = np.cos(model.deltas * t), np.sin(model.deltas * t)
    spins = np.zeros((model.classes, 3, 3))
    spins[:, 0, 0] = spins[:, 1, 1] = decay * cos_d
    spins[:, 0, 1] = -decay * sin_d
    spins[:, 1, 0] = decay * sin_d
    spins[:, 2, 2] = 1.0
    noise = np.zeros(covariance_size(model.classes))
    noise[0] = noise[1] = 0.5 * (1.0 - math.exp(-2.0 * model.kappa * t))
    spin_noise = model.populations * (1.0 - np.exp(-2.0 * model.gamma * t))
    noise[2::3] = spin_noise
    noise[3::3] = spin_noise
    return cavity, spins, noise


def apply_block_diagonal(
    cavity: NDArray[np.float64], spins: NDArray[np.float64], cov: NDArray[np.float64]
) -> NDArray[np.float64]:
    """``Φ C Φᵀ`` for ``Φ = blockdiag(cavity, spins[0], ..., spins[M-1])``."""

    def rows(matrix: NDArray[np.float64]) -> NDArray[np.float64]:
        n = matrix.shape[0]
        out = np.empty_like(matrix)
        out[:2] = cavity @ matrix[:2]
        out[2:] = np.matmul(spins, matrix[2:].reshape(spins.shape[0], 3, n)).reshape(-1, n)
        return out

    half = rows(cov)
    return rows(half.T.copy())


def _propagate_decoupled(
    state: SystemState,
    model: _Model,
    grid: FrequencyGrid,
    samples: NDArray[np.float64],
    duration: float,
) -> MomentTrajectory:
    times = np.append(samples, duration)
    reduced = []
    final: SystemState | None = None
    for t in times:
        cavity, spins, noise = _decoupled_maps(model, float(t))
        a = state.a_c * complex(math.exp(-model.kappa * t)) * np.exp(-1j * model.delta_cs * t)
        bloch = np.einsum("mij,mj->mi", spins, state.bloch)
        cov = None
        if state.cov is not None:
            cov = apply_block_diagonal(cavity, spins, state.cov)
            cov[np.diag_indices_from(cov)] += noise
        reduced.append(_reduce_state(state.time + float(t), complex(a), bloch, cov, grid))
        final = SystemState(a_c=complex(a), bloch=bloch, cov=cov, time=state.time + float(t))
    assert final is not None
    return _from_reduced(state.time, times, np.stack(reduced), grid.size, final, None)


def _propagate_stationary(
    state: SystemState,
    model: _Model,
    grid: FrequencyGrid,
    samples: NDArray[np.float64],
    duration: float,
    psd_tolerance: float,
) -> MomentTrajectory:
    """Exact Lyapunov propagation for a constant Jacobian (Van Loan)."""
    assert state.cov is not None
    jac = model.jacobian(state.a_c, state.bloch)
    diffusion = np.diag(model.diffusion())
    n = jac.shape[0]
    times = np.append(samples, duration)
    cov = state.cov
    # 单步 expm 的增长受 |J|·step 限制，长步拆成等长子步
    max_chunk = _STATIONARY_CHUNK / max(float(np.abs(jac).sum(axis=1).max()), 1e-12)
    elapsed = 0.0
    cache: dict[float, tuple[NDArray[np.float64], NDArray[np.float64]]] = {}
    reduced = []
    for t in times:
        step = float(t) - elapsed
        pieces = max(1, math.ceil(step / max_chunk))
        sub_step = step / pieces
        key = round(sub_step, 12)
        if key not in cache:
            block = np.zeros((2 * n, 2 * n))
            block[:n, :n] = -jac
            block[:n, n:] = diffusion
            block[n:, n:] = jac.T
            exp_block = expm(block * sub_step)
            transition = exp_block[n:, n:].T
            cache[key] = (transition, transition @ exp_block[:n, n:])
        transition, noise = cache[key]
        for _ in range(pieces):
            cov = transition @ cov @ transition.T + noise
            cov = 0.5 * (cov + cov.T)
        elapsed = float(t)
        reduced.append(_reduce_state(state.time + elapsed, state.a_c, state.bloch, cov, grid))
    end_time = state.time + duration
    check_psd(cov, end_time, psd_tolerance)
    final = SystemState(a_c=state.a_c, bloch=state.bloch.copy(), cov=cov, time=end_time)
    logger.debug(
        "[event=stationary_segment]",
        extra={"extra": {"classes": grid.size, "samples": len(times)}},
    )
    return _from_reduced(state.time, times, np.stack(reduced), grid.size, final, None)
