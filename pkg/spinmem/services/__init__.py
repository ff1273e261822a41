from .base import (
    CovarianceNotPSDError,
    DegenerateFitError,
    InstabilityError,
    IntegrationError,
    MemoryBudgetError,
    NonFiniteStateError,
    ProtocolSegmentError,
    SimulationError,
    UndriveableCavityError,
)
from .io_map import (
    GainMap,
    RunResult,
    fit_gain_decay,
    fit_io_map,
    fit_noise_slope,
    principal_variances,
    qubit_fidelity,
    qubit_fidelity_symmetric,
)
from .linear_dynamics import (
    LinearTrajectory,
    PhaseProfile,
    TwoModeSystem,
    evolve_linear,
    focus_time,
    phase_profile,
    two_mode_reduction,
)
from .moment_dynamics import (
    ExternalDrive,
    MomentTrajectory,
    PrescribedField,
    evolve_moments,
    noise_observables,
)
from .noise_closed_forms import (
    eigenrates,
    inverted_decay_closed_form,
    steady_state_noise,
    transient_variance_closed_form,
)
from .oracles import (
    StarkParams,
    adiabatic_trajectory,
    decoupling_gain_theta,
    resn_predictions,
    rule_of_thumb_gain,
)
from .protocol import (
    BatteryRun,
    ProtocolRun,
    ProtocolSettings,
    analyze_battery,
    plan_protocol,
    run_battery,
    run_protocol,
)
from .pulses import apply_rotation, cavity_drive, inverse_filter_beta, sech_drive_amplitude
from .validation import convergence_scan, detect_revival, free_induction, psd_summary

__all__ = [
    "SimulationError",
    "IntegrationError",
    "NonFiniteStateError",
    "CovarianceNotPSDError",
    "InstabilityError",
    "MemoryBudgetError",
    "UndriveableCavityError",
    "DegenerateFitError",
    "ProtocolSegmentError",
    "GainMap",
    "RunResult",
    "fit_io_map",
    "fit_gain_decay",
    "fit_noise_slope",
    "principal_variances",
    "qubit_fidelity",
    "qubit_fidelity_symmetric",
    "LinearTrajectory",
    "PhaseProfile",
    "TwoModeSystem",
    "evolve_linear",
    "focus_time",
    "phase_profile",
    "two_mode_reduction",
    "ExternalDrive",
    "MomentTrajectory",
    "PrescribedField",
    "evolve_moments",
    "noise_observables",
    "eigenrates",
    "inverted_decay_closed_form",
    "steady_state_noise",
    "transient_variance_closed_form",
    "StarkParams",
    "adiabatic_trajectory",
    "decoupling_gain_theta",
    "resn_predictions",
    "rule_of_thumb_gain",
    "BatteryRun",
    "ProtocolRun",
    "ProtocolSettings",
    "analyze_battery",
    "plan_protocol",
    "run_battery",
    "run_protocol",
    "apply_rotation",
    "cavity_drive",
    "inverse_filter_beta",
    "sech_drive_amplitude",
    "convergence_scan",
    "detect_revival",
    "free_induction",
    "psd_summary",
]
