"""TOML scenario files validated with pydantic."""

from __future__ import annotations

import math
import sys
from pathlib import Path
from typing import Any, Literal

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from pydantic.config import ConfigDict

from spinmem.domain import (
    CouplingMode,
    DriveMode,
    DriveSpec,
    FocusRule,
    FrequencyGrid,
    PhysicalParams,
    RotationSpec,
    ScheduleSpec,
    SegmentTemplate,
    auto_d_delta,
    build_frequency_grid,
)
from spinmem.infra.integrator import IntegratorSettings
from spinmem.services.protocol import ProtocolSettings

ScenarioName = Literal["swap-scan", "decouple-scan", "inversion-scan", "run-protocol", "validate"]
SCENARIOS: tuple[str, ...] = (
    "swap-scan",
    "decouple-scan",
    "inversion-scan",
    "run-protocol",
    "validate",
)

# 扫描参数名 -> (配置段, 字段)
SWEEP_TARGETS: dict[str, tuple[str, str]] = {
    "g_ens": ("physical", "g_ens"),
    "gamma_perp": ("physical", "gamma_perp"),
    "t_mem": ("schedule", "t_mem"),
    "swap_kappa": ("schedule", "swap_kappa"),
    "decouple_kappa": ("schedule", "decouple_kappa"),
    "delta_cs": ("schedule", "delta_cs"),
    "angle": ("pulses", "angle"),
    "chi_ratio": ("pulses", "chi_ratio"),
    "beta_sech": ("pulses", "beta_sech"),
}

__all__ = [
    "SCENARIOS",
    "SWEEP_TARGETS",
    "ConfigError",
    "ScenarioConfig",
    "load_config",
]


class ConfigError(ValueError):
    """Raised when a scenario file cannot be read or fails validation."""


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class PhysicalSection(_Section):
    w: float = Field(default=1.0, gt=0)
    tau: float | None = Field(default=None, gt=0)
    gamma_perp: float = Field(default=0.0, ge=0)
    n_spins: float = Field(default=1e12, ge=1)
    g_ens: float | None = Field(default=None, ge=0)
    g: float | None = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _one_of_each(self) -> "PhysicalSection":
        if (self.g_ens is None) == (self.g is None):
            raise ValueError("set exactly one of g_ens or g")
        if self.tau is not None and self.gamma_perp != 0.0:
            raise ValueError("set tau or gamma_perp, not both")
        return self

    def to_params(self) -> PhysicalParams:
        tau = self.tau if self.tau is not None else (
            math.inf if self.gamma_perp == 0 else 1.0 / self.gamma_perp
        )
        if self.g_ens is not None:
            return PhysicalParams.from_ensemble_coupling(
                self.g_ens, n_spins=self.n_spins, w=self.w, tau=tau
            )
        assert self.g is not None
        return PhysicalParams(w=self.w, tau=tau, n_spins=self.n_spins, g=self.g)


class GridSection(_Section):
    delta_cut: float | None = Field(default=None, ge=0)
    delta_cut_over_gamma: float = Field(default=100.0, gt=0)
    d_delta: float | Literal["auto"] = "auto"
    normalization: Literal["renormalized", "lorentzian"] = "renormalized"
    homogeneous: bool = False
    allow_under_resolved: bool = False

    @field_validator("d_delta")
    @classmethod
    def _positive_spacing(cls, v: float | str) -> float | str:
        if isinstance(v, float) and not v > 0:
            raise ValueError("d_delta must be positive or 'auto'")
        return v

    def cut(self, params: PhysicalParams) -> float:
        if self.delta_cut is not None:
            return self.delta_cut
        return self.delta_cut_over_gamma * params.gamma

    def spacing(self, t_mem: float) -> float:
        return auto_d_delta(t_mem) if self.d_delta == "auto" else float(self.d_delta)

    def build(self, params: PhysicalParams, t_mem: float) -> FrequencyGrid:
        """Grid for a run of length ``t_mem``; rejects under-resolved spacings unless allowed."""
        if self.homogeneous:
            return build_frequency_grid(params, 0.0, 0.0, normalization=self.normalization)
        grid = build_frequency_grid(
            params, self.cut(params), self.spacing(t_mem), normalization=self.normalization
        )
        if not self.allow_under_resolved:
            grid.check_resolution(t_mem)
        return grid


class ScheduleSection(_Section):
    t_mem: float = Field(gt=0)
    rule: FocusRule = FocusRule.SYMMETRIC
    swap_kappa: float = Field(default=0.0, ge=0)
    include_swaps: bool = True
    # 默认失谐腔退耦（κ = 0.75w，Δcs = ±50w）；硬退耦需显式选择
    decoupling: Literal["hard", "detuned"] = "detuned"
    decouple_kappa: float = Field(default=0.75, ge=0)
    delta_cs: float = 50.0
    delta_cs_prime: float | None = None
    prime_sign: Literal[-1, 1] = -1

    @property
    def inverted_detuning(self) -> float:
        """Cavity detuning while the ensemble is inverted."""
        if self.delta_cs_prime is not None:
            return self.delta_cs_prime
        return self.prime_sign * self.delta_cs

    def templates(self) -> tuple[SegmentTemplate, SegmentTemplate]:
        """Templates of the non-inverted and inverted waiting periods."""
        if self.decoupling == "hard":
            hard = SegmentTemplate(
                kappa=self.decouple_kappa, coupling_mode=CouplingMode.HARD_DECOUPLED
            )
            return hard, hard
        return (
            SegmentTemplate(kappa=self.decouple_kappa, delta_cs=self.delta_cs),
            SegmentTemplate(kappa=self.decouple_kappa, delta_cs=self.inverted_detuning),
        )


class PulseSection(_Section):
    kind: Literal["rotation", "sech"] = "rotation"
    axis: Literal["x", "y"] = "y"
    angle: float = math.pi
    duration: float = Field(default=0.0, ge=0)
    kappa: float = Field(default=7.5, ge=0)
    delta_cs: float = 0.0
    mu: float = Field(default=3.0, gt=0)
    beta_sech: float = Field(default=1.0, gt=0)
    chi_ratio: float = Field(default=1.0, ge=0)
    chi_max: float | None = Field(default=None, ge=0)
    window: float | None = Field(default=None, gt=0)
    mode: DriveMode = DriveMode.PRESCRIBED

    @property
    def rabi_max(self) -> float:
        """χ_max, given directly or as a multiple of the bandwidth μβ."""
        if self.chi_max is not None:
            return self.chi_max
        return self.chi_ratio * self.mu * self.beta_sech

    def drive(self) -> DriveSpec:
        return DriveSpec(
            chi_max=self.rabi_max,
            beta_sech=self.beta_sech,
            mu=self.mu,
            truncation_window=self.window,
            mode=self.mode,
        )

    def rotation(self) -> RotationSpec:
        if self.axis == "x":
            return RotationSpec.about_x(self.angle)
        return RotationSpec.about_y(self.angle)

    def template(self) -> SegmentTemplate:
        if self.kind == "sech":
            drive = self.drive()
            return SegmentTemplate(
                kappa=self.kappa, delta_cs=self.delta_cs, drive=drive, duration=drive.window
            )
        # 转动段内 g=0；有限时长时腔以 kappa 衰减
        return SegmentTemplate(
            kappa=self.kappa,
            coupling_mode=CouplingMode.HARD_DECOUPLED,
            drive=self.rotation(),
            duration=self.duration,
        )


class NumericsSection(_Section):
    method: Literal["DOP853", "RK45"] = "DOP853"
    rtol: float = Field(default=1e-9, gt=0)
    atol: float = Field(default=1e-12, gt=0)
    max_step: float = Field(default=math.inf, gt=0)
    psd_tolerance: float = Field(default=1e-9, gt=0)
    samples_per_segment: int = Field(default=40, ge=1)
    # 协方差运行的峰值内存上限（GiB）
    memory_budget_gb: float = Field(default=8.0, gt=0)

    def integrator(self) -> IntegratorSettings:
        return IntegratorSettings(
            method=self.method, rtol=self.rtol, atol=self.atol, max_step=self.max_step
        )

    def protocol(self) -> ProtocolSettings:
        return ProtocolSettings(
            integrator=self.integrator(),
            samples_per_segment=self.samples_per_segment,
            psd_tolerance=self.psd_tolerance,
            memory_budget=self.memory_budget_gb * 2**30,
        )


class SweepSection(_Section):
    parameter: str | None = None
    values: list[float] = Field(default_factory=list)
    reference_gain: float = Field(default=0.997, gt=0)

    @model_validator(mode="after")
    def _known_parameter(self) -> "SweepSection":
        if self.parameter is None:
            if self.values:
                raise ValueError("values given without a sweep parameter")
            return self
        if self.parameter not in SWEEP_TARGETS:
            raise ValueError(
                f"unknown sweep parameter {self.parameter!r}; "
                f"expected one of {sorted(SWEEP_TARGETS)}"
            )
        if not self.values:
            raise ValueError("a sweep needs at least one value")
        return self


class BatterySection(_Section):
    # 幅度过大时平均场非线性会破坏线性映射
    magnitude: float = Field(default=1.0, gt=0, le=2.0)
    count: int = Field(default=8, ge=3)
    linearity_check: bool = True


class ValidationSection(_Section):
    cuts: list[float] = Field(default_factory=lambda: [20.0, 30.0, 50.0, 100.0])
    kappa: float | None = Field(default=None, ge=0)
    samples: int = Field(default=31, ge=3)
    with_covariance: bool = False
    revival_samples: int = Field(default=4000, ge=100)
    psd_check: bool = True

    @field_validator("cuts")
    @classmethod
    def _increasing(cls, v: list[float]) -> list[float]:
        if len(v) < 2 or any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("cuts must hold at least two increasing values")
        if v[0] <= 0:
            raise ValueError("cuts must be positive")
        return v


class OutputSection(_Section):
    directory: Path = Path("out")
    prefix: str | None = None
    write_trace: bool = True


class ScenarioConfig(_Section):
    scenario: ScenarioName | None = None
    physical: PhysicalSection
    grid: GridSection = Field(default_factory=GridSection)
    schedule: ScheduleSection
    pulses: PulseSection = Field(default_factory=PulseSection)
    numerics: NumericsSection = Field(default_factory=NumericsSection)
    sweep: SweepSection = Field(default_factory=SweepSection)
    battery: BatterySection = Field(default_factory=BatterySection)
    validation: ValidationSection = Field(default_factory=ValidationSection)
    output: OutputSection = Field(default_factory=OutputSection)

    @model_validator(mode="after")
    def _scenario_constraints(self) -> "ScenarioConfig":
        if self.scenario == "decouple-scan" and self.schedule.decoupling != "detuned":
            raise ValueError("decouple-scan needs schedule.decoupling = 'detuned'")
        if self.scenario in ("run-protocol", "validate") and self.sweep.parameter is not None:
            raise ValueError(f"{self.scenario} does not take a sweep")
        return self

    @property
    def name(self) -> str:
        if self.scenario is None:
            raise ConfigError("no scenario selected")
        return self.scenario

    @property
    def file_prefix(self) -> str:
        return self.output.prefix or self.name.replace("-", "_")

    def schedule_spec(self) -> ScheduleSpec:
        waits, inverted = self.schedule.templates()
        pulse = self.pulses.template()
        return ScheduleSpec(
            swap=SegmentTemplate(kappa=self.schedule.swap_kappa),
            storage_wait=waits,
            first_pulse=pulse,
            inverted_wait=inverted,
            second_pulse=pulse,
            retrieval_wait=waits,
            include_swaps=self.schedule.include_swaps,
        )

    def with_scenario(self, scenario: str) -> "ScenarioConfig":
        if self.scenario is not None and self.scenario != scenario:
            raise ConfigError(
                f"config declares scenario {self.scenario!r}, command asked for {scenario!r}"
            )
        return _validate({**self.model_dump(), "scenario": scenario})

    def with_value(self, parameter: str, value: float) -> "ScenarioConfig":
        """Copy with one sweep parameter replaced (re-validated)."""
        section, field = SWEEP_TARGETS[parameter]
        data = self.model_dump()
        data[section] = {**data[section], field: value}
        # 同一物理量的另一种写法需要清空，否则校验冲突
        if parameter == "g_ens":
            data["physical"]["g"] = None
        if parameter == "gamma_perp":
            data["physical"]["tau"] = None
        if parameter == "chi_ratio":
            data["pulses"]["chi_max"] = None
        data["sweep"] = {**data["sweep"], "parameter": None, "values": []}
        return _validate(data)

    def sweep_points(self) -> list[tuple[int, float | None, "ScenarioConfig"]]:
        if self.sweep.parameter is None:
            return [(0, None, self)]
        return [
            (index, value, self.with_value(self.sweep.parameter, value))
            for index, value in enumerate(self.sweep.values)
        ]


def _validate(data: dict[str, Any]) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: Path) -> ScenarioConfig:
    try:
        with path.open("rb") as handle:
            data = tomllib.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from exc
    return _validate(data)
