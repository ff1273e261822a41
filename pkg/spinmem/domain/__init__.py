from spinmem.domain.errors import (
    DomainError,
    GridResolutionError,
    InvalidParameterError,
    OverdampedSwapError,
    ScheduleInfeasibleError,
)
from spinmem.domain.grid import FrequencyGrid, auto_d_delta, build_frequency_grid
from spinmem.domain.params import DerivedRates, PhysicalParams
from spinmem.domain.schedule import (
    FocusRule,
    ProtocolSchedule,
    ScheduleSpec,
    SegmentTemplate,
    build_schedule,
)
from spinmem.domain.segments import (
    CavitySegment,
    CouplingMode,
    DriveMode,
    DriveSpec,
    RotationSpec,
)
from spinmem.domain.states import LinearState, NoiseObservables, SystemState
from spinmem.domain.swap import effective_frequency, swap_closed_form, swap_time

__all__ = [
    "CavitySegment",
    "CouplingMode",
    "DerivedRates",
    "DomainError",
    "DriveMode",
    "DriveSpec",
    "FocusRule",
    "FrequencyGrid",
    "GridResolutionError",
    "InvalidParameterError",
    "LinearState",
    "NoiseObservables",
    "OverdampedSwapError",
    "PhysicalParams",
    "ProtocolSchedule",
    "RotationSpec",
    "ScheduleInfeasibleError",
    "ScheduleSpec",
    "SegmentTemplate",
    "SystemState",
    "auto_d_delta",
    "build_frequency_grid",
    "build_schedule",
    "effective_frequency",
    "swap_closed_form",
    "swap_time",
]
