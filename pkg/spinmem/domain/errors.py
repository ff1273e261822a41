from __future__ import annotations


class DomainError(ValueError):
    """Base class for invalid physical inputs and unsatisfiable timelines."""


class InvalidParameterError(DomainError):
    """Raised when a parameter violates its physical invariant."""

    def __init__(self, field: str, message: str):
        self.field = field
        self.detail = message
        super().__init__(f"{field}: {message}")

    def __reduce__(self) -> tuple[type, tuple[str, str]]:
        return self.__class__, (self.field, self.detail)


class GridResolutionError(DomainError):
    """Raised when a frequency grid cannot be built or is too coarse."""


class ScheduleInfeasibleError(DomainError):
    """Raised when the focusing rule forces a negative segment duration."""


class OverdampedSwapError(DomainError):
    """Raised when the cavity-ensemble exchange does not oscillate (g' imaginary)."""
