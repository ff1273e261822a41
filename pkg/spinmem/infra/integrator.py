"""Adaptive Runge-Kutta driver with per-step projection and dense output."""

from __future__ import annotations

import math
import time as _time
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import DOP853, RK45, OdeSolution

from spinmem.infra.observability.metrics import observe_integration

RhsFunction = Callable[[float, NDArray[np.float64]], NDArray[np.float64]]
StepHook = Callable[[float, NDArray[np.float64]], None]
Observer = Callable[[float, NDArray[np.float64]], NDArray[np.float64]]

_METHODS = {"DOP853": DOP853, "RK45": RK45}


class IntegrationFailure(RuntimeError):
    """Raised when the adaptive solver cannot reach the end of the interval."""

    def __init__(self, message: str, *, time: float, reason: Literal["step", "non_finite"]):
        self.time = time
        self.reason = reason
        super().__init__(f"{message} (t={time:.6g})")


@dataclass(frozen=True, slots=True)
class IntegratorSettings:
    method: Literal["DOP853", "RK45"] = "DOP853"
    rtol: float = 1e-9
    atol: float = 1e-12
    max_step: float = math.inf

    def __post_init__(self) -> None:
        if self.method not in _METHODS:
            raise ValueError(f"unknown integration method {self.method!r}")
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("rtol and atol must be positive")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")


@dataclass(frozen=True)
class Trajectory:
    times: NDArray[np.float64]
    values: NDArray[np.float64]
    """Samples, or observer outputs at the samples, one row per time."""
    final_state: NDArray[np.float64]
    dense: OdeSolution | None
    steps: int
    evaluations: int


def integrate(
    rhs: RhsFunction,
    t_span: tuple[float, float],
    y0: NDArray[np.float64],
    settings: IntegratorSettings,
    *,
    t_eval: NDArray[np.float64] | None = None,
    dense: bool = False,
    after_step: StepHook | None = None,
    observe: Observer | None = None,
    model: str = "generic",
) -> Trajectory:
    """Integrate ``y' = rhs(t, y)`` over ``t_span``.

    ``after_step`` may project the accepted state in place (e.g. restore
    symmetry). Samples at ``t_eval`` come from the per-step interpolants and the
    end point is always the last sample; ``observe`` reduces each sample
    before it is stored.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    y0 = np.array(y0, dtype=np.float64)
    reduce = observe or (lambda _t, y: np.array(y, dtype=np.float64))
    samples = np.array([] if t_eval is None else t_eval, dtype=np.float64)
    samples = samples[(samples >= t0) & (samples < t1)]
    if t1 <= t0:
        return Trajectory(
            times=np.array([t0]),
            values=np.asarray(reduce(t0, y0))[None, ...],
            final_state=y0,
            dense=None,
            steps=0,
            evaluations=0,
        )

    started = _time.perf_counter()
    solver = _METHODS[settings.method](
        rhs, t0, y0, t1, rtol=settings.rtol, atol=settings.atol, max_step=settings.max_step
    )
    out_times: list[float] = []
    out_values: list[NDArray[np.float64]] = []
    interpolants = []
    step_times = [t0]
    cursor = 0
    if samples.size and samples[0] == t0:
        out_times.append(t0)
        out_values.append(np.asarray(reduce(t0, y0)))
        cursor = 1
    steps = 0
    while solver.status == "running":
        message = solver.step()
        steps += 1
        if solver.status == "failed":
            raise IntegrationFailure(str(message), time=float(solver.t), reason="step")
        if not np.all(np.isfinite(solver.y)):
            raise IntegrationFailure(
                "state became non-finite", time=float(solver.t), reason="non_finite"
            )
        needs_interpolant = dense or (cursor < samples.size and samples[cursor] < solver.t)
        interpolant = solver.dense_output() if needs_interpolant else None
        while cursor < samples.size and samples[cursor] < solver.t:
            assert interpolant is not None
            out_times.append(float(samples[cursor]))
            sample = np.asarray(interpolant(samples[cursor]), dtype=np.float64)
            out_values.append(np.asarray(reduce(float(samples[cursor]), sample)))
            cursor += 1
        if after_step is not None:
            before = solver.y.copy()
            after_step(float(solver.t), solver.y)
            if not np.array_equal(before, solver.y):
                # FSAL 方法会复用末端导数，投影后必须重算
                solver.f = solver.fun(solver.t, solver.y)
        if dense:
            interpolants.append(interpolant)
            step_times.append(float(solver.t))

    out_times.append(t1)
    final_state = np.array(solver.y, dtype=np.float64)
    out_values.append(np.asarray(reduce(t1, final_state)))
    observe_integration(model, steps, solver.nfev, _time.perf_counter() - started)
    return Trajectory(
        times=np.array(out_times),
        values=np.stack(out_values),
        final_state=final_state,
        dense=OdeSolution(step_times, interpolants) if dense else None,
        steps=steps,
        evaluations=int(solver.nfev),
    )


def pack_complex(values: NDArray[np.complex128]) -> NDArray[np.float64]:
    values = np.asarray(values, dtype=np.complex128)
    return np.concatenate([values.real, values.imag])


def unpack_complex(packed: NDArray[np.float64]) -> NDArray[np.complex128]:
    half = packed.shape[-1] // 2
    return packed[..., :half] + 1j * packed[..., half:]
