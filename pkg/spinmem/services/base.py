from __future__ import annotations

from contextlib import contextmanager
from typing import Iterator

from spinmem.infra.integrator import IntegrationFailure


class SimulationError(RuntimeError):
    """Base class for numerical failures during a simulation."""


class IntegrationError(SimulationError):
    """Raised when the ODE solver cannot finish a segment (step-size underflow)."""

    def __init__(self, message: str, time: float | None = None):
        self.time = time
        super().__init__(message)

    def __reduce__(self) -> tuple[type, tuple[str, float | None]]:
        return self.__class__, (str(self.args[0]), self.time)


class NonFiniteStateError(IntegrationError):
    """Raised when a state component becomes NaN or infinite."""


class CovarianceNotPSDError(SimulationError):
    """Raised when the covariance loses positive semidefiniteness beyond tolerance."""

    def __init__(self, min_eigenvalue: float, trace: float, time: float):
        self.min_eigenvalue = min_eigenvalue
        self.trace = trace
        self.time = time
        super().__init__(
            f"covariance not PSD at t={time:.6g}: "
            f"min eigenvalue {min_eigenvalue:.3e} (trace {trace:.3e})"
        )

    def __reduce__(self) -> tuple[type, tuple[float, float, float]]:
        return self.__class__, (self.min_eigenvalue, self.trace, self.time)


class InstabilityError(SimulationError):
    """Raised when the inverted ensemble is above threshold (C̃ >= 1)."""

    def __init__(self, c_tilde: float):
        self.c_tilde = c_tilde
        super().__init__(f"unstable inverted ensemble: C̃={c_tilde:.6g} >= 1")

    def __reduce__(self) -> tuple[type, tuple[float]]:
        return self.__class__, (self.c_tilde,)


class MemoryBudgetError(SimulationError):
    """Raised before a covariance run whose working set would exceed the memory budget."""

    def __init__(self, classes: int, required: float, budget: float):
        self.classes = classes
        self.required = required
        self.budget = budget
        super().__init__(
            f"covariance run over {classes} classes needs ~{required / 2**30:.1f} GiB, "
            f"budget is {budget / 2**30:.1f} GiB; use a coarser grid, a means-only run "
            "or raise numerics.memory_budget_gb"
        )

    def __reduce__(self) -> tuple[type, tuple[int, float, float]]:
        return self.__class__, (self.classes, self.required, self.budget)


class UndriveableCavityError(SimulationError):
    """Raised when an external drive is requested for a cavity with kappa = 0."""


class DegenerateFitError(SimulationError):
    """Raised when fit inputs do not determine the fitted model."""


class ProtocolSegmentError(SimulationError):
    """Raised when one protocol segment fails; wraps the original cause."""

    def __init__(self, segment_index: int, label: str, cause: SimulationError):
        self.segment_index = segment_index
        self.label = label
        self.cause = cause
        super().__init__(f"segment {segment_index} ({label}) failed: {cause}")

    def __reduce__(self) -> tuple[type, tuple[int, str, SimulationError]]:
        return self.__class__, (self.segment_index, self.label, self.cause)


@contextmanager
def translate_integration_failures() -> Iterator[None]:
    """Map solver-level failures onto the service error hierarchy."""
    try:
        yield
    except IntegrationFailure as exc:
        if exc.reason == "non_finite":
            raise NonFiniteStateError(str(exc), time=exc.time) from exc
        raise IntegrationError(str(exc), time=exc.time) from exc
