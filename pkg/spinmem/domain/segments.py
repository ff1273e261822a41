from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Union

from spinmem.domain.errors import InvalidParameterError

_AXIS_TOLERANCE = 1e-9


class CouplingMode(str, Enum):
    COUPLED = "coupled"
    HARD_DECOUPLED = "hard-decoupled"


class DriveMode(str, Enum):
    PRESCRIBED = "prescribed-intracavity"
    EXTERNAL_BETA = "external-beta"


@dataclass(frozen=True, slots=True)
class DriveSpec:
    """Hyperbolic-secant intracavity drive ``a_max * sech(beta*(t-t_c))**(1+i*mu)``.

    Times are relative to the start of the segment carrying the drive.
    ``t_center`` defaults to the middle of the truncation window, which in
    turn defaults to ``16/beta_sech``.
    """

    chi_max: float
    beta_sech: float
    mu: float
    t_center: float | None = None
    truncation_window: float | None = None
    mode: DriveMode = DriveMode.PRESCRIBED

    def __post_init__(self) -> None:
        if not self.chi_max >= 0:
            raise InvalidParameterError("chi_max", "must be non-negative")
        if not self.beta_sech > 0:
            raise InvalidParameterError("beta_sech", "must be positive")
        if not self.mu > 0:
            raise InvalidParameterError("mu", "must be positive")
        if self.truncation_window is not None and not self.truncation_window > 0:
            raise InvalidParameterError("truncation_window", "must be positive")

    @property
    def window(self) -> float:
        if self.truncation_window is not None:
            return self.truncation_window
        return 16.0 / self.beta_sech

    @property
    def center(self) -> float:
        return self.window / 2 if self.t_center is None else self.t_center

    @property
    def bandwidth(self) -> float:
        return self.mu * self.beta_sech

    def amplitude_max(self, g: float) -> float:
        """Peak intracavity amplitude giving ``chi_max = 2*g*a_max``."""
        if g <= 0:
            raise InvalidParameterError("g", "a drive needs a non-zero single-spin coupling")
        return self.chi_max / (2.0 * g)


@dataclass(frozen=True, slots=True)
class RotationSpec:
    """Instantaneous rotation of every spin class about an equatorial axis."""

    axis: tuple[float, float, float] = (0.0, 1.0, 0.0)
    angle: float = math.pi

    def __post_init__(self) -> None:
        norm = math.sqrt(sum(c * c for c in self.axis))
        if abs(norm - 1.0) > _AXIS_TOLERANCE:
            raise InvalidParameterError("axis", f"must be a unit vector, got norm {norm:.6g}")
        if abs(self.axis[2]) > _AXIS_TOLERANCE:
            raise InvalidParameterError("axis", "must lie in the equatorial plane")
        if not math.isfinite(self.angle):
            raise InvalidParameterError("angle", "must be finite")

    @classmethod
    def about_x(cls, angle: float = math.pi) -> "RotationSpec":
        return cls(axis=(1.0, 0.0, 0.0), angle=angle)

    @classmethod
    def about_y(cls, angle: float = math.pi) -> "RotationSpec":
        return cls(axis=(0.0, 1.0, 0.0), angle=angle)


Drive = Union[DriveSpec, RotationSpec]


@dataclass(frozen=True, slots=True)
class CavitySegment:
    kappa: float
    delta_cs: float = 0.0
    duration: float = 0.0
    coupling_mode: CouplingMode = CouplingMode.COUPLED
    drive: Drive | None = None
    label: str = ""

    def __post_init__(self) -> None:
        if not (self.kappa >= 0 and math.isfinite(self.kappa)):
            raise InvalidParameterError("kappa", "must be non-negative and finite")
        if not (self.duration >= 0 and math.isfinite(self.duration)):
            raise InvalidParameterError("duration", "must be non-negative and finite")
        if not math.isfinite(self.delta_cs):
            raise InvalidParameterError("delta_cs", "must be finite")
        if isinstance(self.drive, DriveSpec):
            if self.coupling_mode is CouplingMode.HARD_DECOUPLED:
                raise InvalidParameterError(
                    "drive", "a cavity drive cannot act on a hard-decoupled ensemble"
                )
            half = self.drive.window / 2
            slack = 1e-12 * max(self.duration, 1.0)
            if (
                self.drive.center - half < -slack
                or self.drive.center + half > self.duration + slack
            ):
                raise InvalidParameterError(
                    "drive", "truncation window extends beyond the segment"
                )

    @property
    def coupled(self) -> bool:
        return self.coupling_mode is CouplingMode.COUPLED

    def with_duration(self, duration: float) -> "CavitySegment":
        return CavitySegment(
            kappa=self.kappa,
            delta_cs=self.delta_cs,
            duration=duration,
            coupling_mode=self.coupling_mode,
            drive=self.drive,
            label=self.label,
        )
