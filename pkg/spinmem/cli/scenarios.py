"""Scenario commands: figure-data scans, a single protocol run and numerics validation.

Every scenario returns tables (written as CSV with units in the header) and a
summary (written as JSON next to them). Nothing here depends on wall-clock
time or worker scheduling, so identical configs give identical files.
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable

import numpy as np
from numpy.typing import NDArray

from spinmem import __version__
from spinmem.cli.schemas import ScenarioConfig
from spinmem.cli.sweep import SweepPoint, run_sweep
from spinmem.domain import (
    DerivedRates,
    FrequencyGrid,
    PhysicalParams,
    ProtocolSchedule,
    SystemState,
    auto_d_delta,
    build_frequency_grid,
)
from spinmem.infra.export import Column, write_csv, write_json
from spinmem.services.io_map import RunResult, fit_gain_decay, fit_noise_slope
from spinmem.services.oracles import (
    StarkParams,
    adiabatic_trajectory,
    decoupling_gain_theta,
    detuning_noise_bound,
    energy_leakage_deficit,
    resn_predictions,
    rule_of_thumb_gain,
)
from spinmem.services.protocol import (
    BatteryRun,
    ProtocolSettings,
    analyze_battery,
    battery_amplitudes,
    plan_protocol,
    run_battery,
    run_protocol,
)
from spinmem.services.validation import (
    RevivalReport,
    convergence_scan,
    detect_revival,
    free_induction,
    is_monotone_decreasing,
    psd_summary,
    revival_baseline,
)

logger = logging.getLogger(__name__)

SWEEP_UNITS = {
    "g_ens": "w",
    "gamma_perp": "w",
    "t_mem": "1/w",
    "swap_kappa": "w",
    "decouple_kappa": "w",
    "delta_cs": "w",
    "angle": "rad",
    "chi_ratio": "1",
    "beta_sech": "w",
}
# 退相位期间 T0 的经验拟合：T0 ≈ 4.0/β_sech + 0.92·T_swap
T0_PULSE_COEFFICIENT = 4.0
T0_SWAP_COEFFICIENT = 0.92

__all__ = [
    "ScenarioOutput",
    "Table",
    "run_scenario",
    "write_outputs",
]


@dataclass(frozen=True)
class Table:
    columns: tuple[Column, ...]
    rows: list[tuple[Any, ...]]

    def column(self, name: str) -> NDArray[np.float64]:
        k = [c.name for c in self.columns].index(name)
        return np.array([row[k] for row in self.rows], dtype=np.float64)


@dataclass(frozen=True)
class ScenarioOutput:
    tables: dict[str, Table]
    summary: dict[str, Any]


@dataclass(frozen=True)
class PointResult:
    row: tuple[Any, ...]
    extra_rows: tuple[tuple[Any, ...], ...] = ()
    diagnostics: tuple[str, ...] = ()


def _prepare(
    config: ScenarioConfig,
) -> tuple[PhysicalParams, FrequencyGrid, ProtocolSettings]:
    params = config.physical.to_params()
    grid = config.grid.build(params, config.schedule.t_mem)
    return params, grid, config.numerics.protocol()


def _measure(
    config: ScenarioConfig,
    params: PhysicalParams,
    grid: FrequencyGrid,
    settings: ProtocolSettings,
) -> tuple[RunResult, BatteryRun, ProtocolSchedule]:
    schedule = plan_protocol(
        config.schedule.t_mem,
        params,
        grid,
        config.schedule_spec(),
        config.schedule.rule,
        settings=settings.integrator,
    )
    battery = run_battery(
        schedule,
        grid,
        params,
        battery_amplitudes(config.battery.magnitude, config.battery.count),
        settings=settings,
        linearity_check=config.battery.linearity_check,
    )
    return analyze_battery(battery, grid), battery, schedule


def _log_slope(x: NDArray[np.float64], y: NDArray[np.float64]) -> float | None:
    mask = (x > 0) & (y > 0)
    if np.count_nonzero(mask) < 2:
        return None
    slope, _ = np.polyfit(np.log(x[mask]), np.log(y[mask]), 1)
    return float(slope)


def _scan(
    config: ScenarioConfig,
    workers: int,
    evaluate: Callable[[ScenarioConfig], PointResult],
    columns: tuple[Column, ...],
    extra_columns: tuple[Column, ...] = (),
) -> tuple[Table, Table | None, list[SweepPoint[PointResult]]]:
    points = run_sweep(evaluate, config, workers=workers)
    parameter = config.sweep.parameter
    head: tuple[Column, ...] = (Column("index"),)
    if parameter is not None:
        head += (Column(parameter, SWEEP_UNITS[parameter]),)

    def prefix(point: SweepPoint[PointResult]) -> tuple[Any, ...]:
        return (point.index,) if parameter is None else (point.index, point.value)

    main = Table(head + columns, [prefix(p) + p.result.row for p in points])
    extra = None
    if extra_columns:
        extra = Table(
            (Column("index"),) + extra_columns,
            [(p.index,) + row for p in points for row in p.result.extra_rows],
        )
    return main, extra, points


def _diagnostics(points: list[SweepPoint[PointResult]]) -> list[dict[str, Any]]:
    return [
        {"index": p.index, "message": message}
        for p in points
        for message in p.result.diagnostics
    ]


# --------------------------------------------------------------------------- swap-scan

SWAP_COLUMNS = (
    Column("g_ens_over_gamma"),
    Column("swap_kappa", "w"),
    Column("gamma_perp", "w"),
    Column("t_mem", "1/w"),
    Column("t_swap", "1/w"),
    Column("t_focus", "1/w"),
    Column("gain"),
    Column("gain_1"),
    Column("gain_2"),
    Column("theta", "rad"),
    Column("sigma_sq"),
    Column("ren"),
    Column("f_q"),
    Column("gain_deficit"),
    Column("x_dephasing"),
    Column("x_leakage"),
    Column("gain_rule_of_thumb"),
)


def swap_point(config: ScenarioConfig) -> PointResult:
    params, grid, settings = _prepare(config)
    result, _, schedule = _measure(config, params, grid, settings)
    kappa = config.schedule.swap_kappa
    gamma_perp = params.gamma_perp
    t_mem, t_swap = schedule.t_mem, schedule.t_swap
    row = (
        params.g_ens / params.gamma,
        kappa,
        gamma_perp,
        t_mem,
        t_swap,
        schedule.t_focus,
        result.gain_avg,
        result.gain_map.g1,
        result.gain_map.g2,
        result.gain_map.theta,
        result.sigma_sq,
        result.ren,
        result.f_q,
        1.0 - result.gain_avg,
        gamma_perp * (t_mem - t_swap),
        kappa * t_swap,
        rule_of_thumb_gain(config.sweep.reference_gain, kappa, gamma_perp, t_swap, t_mem),
    )
    return PointResult(row=row, diagnostics=result.diagnostics)


def _swap_scan(config: ScenarioConfig, workers: int) -> ScenarioOutput:
    table, _, points = _scan(config, workers, swap_point, SWAP_COLUMNS)
    gain = table.column("gain")
    summary: dict[str, Any] = {
        "points": len(points),
        "max_rule_of_thumb_error": float(
            np.max(np.abs(gain - table.column("gain_rule_of_thumb")))
        ),
        "gain_deficit_slope": None,
        "diagnostics": _diagnostics(points),
    }
    if config.sweep.parameter == "g_ens":
        summary["gain_deficit_slope"] = _log_slope(
            table.column("g_ens_over_gamma"), table.column("gain_deficit")
        )
    return ScenarioOutput(tables={"main": table}, summary=summary)


# ----------------------------------------------------------------------- decouple-scan

DECOUPLE_COLUMNS = (
    Column("decouple_kappa", "w"),
    Column("delta_cs", "w"),
    Column("delta_cs_prime", "w"),
    Column("c_tilde"),
    Column("gain"),
    Column("gain_adiabatic"),
    Column("theta", "rad"),
    Column("theta_adiabatic", "rad"),
    Column("gain_deficit"),
    Column("leakage_estimate"),
    Column("noise_bound"),
    Column("resn_mid"),
    Column("resn_mid_predicted"),
    Column("resn_end"),
    Column("resn_end_predicted"),
    Column("resn_ratio"),
    Column("resn_ratio_predicted"),
)
DECOUPLE_TRACE_COLUMNS = (
    Column("t", "1/w"),
    Column("re_s"),
    Column("im_s"),
    Column("re_s_adiabatic"),
    Column("im_s_adiabatic"),
    Column("resn"),
)


def decouple_point(config: ScenarioConfig) -> PointResult:
    """Spectator refocusing: coherent spins, two ideal pulses, detuned cavity."""
    params, grid, settings = _prepare(config)
    sched = config.schedule
    # 绝热解析式按理想 x 轴 π 脉冲推导
    pulse = config.pulses.model_copy(
        update={"kind": "rotation", "axis": "x", "angle": math.pi, "duration": 0.0}
    ).template()
    spec = replace(
        config.schedule_spec(), include_swaps=False, first_pulse=pulse, second_pulse=pulse
    )
    schedule = plan_protocol(
        sched.t_mem, params, grid, spec, sched.rule, settings=settings.integrator
    )
    quarter = sched.t_mem / 4.0
    b0 = complex(config.battery.magnitude)
    initial = SystemState.coherent_spins(grid, params, b0, with_covariance=True)
    run = run_protocol(
        schedule, grid, params, initial=initial, settings=settings, checkpoints=(2 * quarter,)
    )

    kappa, delta, delta_prime = sched.decouple_kappa, sched.delta_cs, sched.inverted_detuning
    ratio = run.final.collective(grid, params) / b0
    gain, theta = abs(ratio), -cmath.phase(ratio)
    gain_ad, theta_ad = decoupling_gain_theta(params, kappa, delta, delta_prime, sched.t_mem)
    c_tilde = DerivedRates.for_segment(params, kappa, delta_prime).c_tilde
    mid_pred, end_pred = (
        resn_predictions(params, kappa, delta_prime) if c_tilde < 1.0 else (math.nan, math.nan)
    )
    resn_mid = run.trace.observable_at(2 * quarter).resn
    resn_end = run.trace.observables[-1].resn
    row = (
        kappa,
        delta,
        delta_prime,
        c_tilde,
        gain,
        gain_ad,
        theta,
        theta_ad,
        1.0 - gain * math.exp(params.gamma_perp * sched.t_mem),
        energy_leakage_deficit(params, kappa, delta),
        detuning_noise_bound(params, kappa, delta),
        resn_mid,
        mid_pred,
        resn_end,
        end_pred,
        resn_end / resn_mid if resn_mid != 0 else math.nan,
        2.0 * kappa / (kappa + params.gamma),
    )

    stark = StarkParams.for_detunings(params, kappa, delta, delta_prime)
    times = np.clip(run.trace.times, 0.0, sched.t_mem)
    oracle = adiabatic_trajectory(stark, quarter, 1.0, times, params)
    s = run.trace.b / b0
    trace = tuple(
        (float(t), float(v.real), float(v.imag), float(o.real), float(o.imag), obs.resn)
        for t, v, o, obs in zip(times, s, oracle, run.trace.observables)
    )
    return PointResult(row=row, extra_rows=trace)


def _relative_error(value: NDArray[np.float64], reference: NDArray[np.float64]) -> float | None:
    mask = np.isfinite(reference) & (reference != 0) & np.isfinite(value)
    if not np.any(mask):
        return None
    return float(np.max(np.abs(value[mask] - reference[mask]) / np.abs(reference[mask])))


def _decouple_scan(config: ScenarioConfig, workers: int) -> ScenarioOutput:
    table, trace, points = _scan(
        config, workers, decouple_point, DECOUPLE_COLUMNS, DECOUPLE_TRACE_COLUMNS
    )
    summary: dict[str, Any] = {
        "points": len(points),
        "theta_relative_error": _relative_error(
            table.column("theta"), table.column("theta_adiabatic")
        ),
        "resn_mid_relative_error": _relative_error(
            table.column("resn_mid"), table.column("resn_mid_predicted")
        ),
        "resn_ratio_relative_error": _relative_error(
            table.column("resn_ratio"), table.column("resn_ratio_predicted")
        ),
        "gain_deficit_slope": None,
        "diagnostics": _diagnostics(points),
    }
    if config.sweep.parameter == "delta_cs":
        summary["gain_deficit_slope"] = _log_slope(
            np.abs(table.column("delta_cs")), table.column("gain_deficit")
        )
    tables = {"main": table}
    if trace is not None and config.output.write_trace:
        tables["trace"] = trace
    return ScenarioOutput(tables=tables, summary=summary)


# ---------------------------------------------------------------------- inversion-scan

INVERSION_COLUMNS = (
    Column("pulse_kind"),
    Column("chi_max", "w"),
    Column("beta_sech", "w"),
    Column("bandwidth", "w"),
    Column("angle", "rad"),
    Column("gamma_perp", "w"),
    Column("t_mem", "1/w"),
    Column("t_swap", "1/w"),
    Column("gain"),
    Column("gain_1"),
    Column("gain_2"),
    Column("theta0", "rad"),
    Column("theta1", "rad"),
    Column("theta", "rad"),
    Column("sigma1_sq"),
    Column("sigma2_sq"),
    Column("sigma_sq"),
    Column("ren"),
    Column("p_exc_end"),
    Column("f_q"),
    Column("infidelity"),
)
INVERSION_TRACE_COLUMNS = (
    Column("t", "1/w"),
    Column("segment"),
    Column("p_exc"),
    Column("sz_mean"),
)
# 输出反转过程：第一、第二个脉冲段
_PULSE_SEGMENTS = (2, 4)


def inversion_point(config: ScenarioConfig) -> PointResult:
    params, grid, settings = _prepare(config)
    result, battery, schedule = _measure(config, params, grid, settings)
    pulses = config.pulses
    sech = pulses.kind == "sech"
    gain_map = result.gain_map
    row = (
        pulses.kind,
        pulses.rabi_max if sech else math.nan,
        pulses.beta_sech if sech else math.nan,
        pulses.mu * pulses.beta_sech if sech else math.inf,
        math.nan if sech else pulses.angle,
        params.gamma_perp,
        schedule.t_mem,
        schedule.t_swap,
        result.gain_avg,
        gain_map.g1,
        gain_map.g2,
        gain_map.theta0,
        gain_map.theta1,
        gain_map.theta,
        result.sigma1_sq,
        result.sigma2_sq,
        result.sigma_sq,
        result.ren,
        result.p_exc_end,
        result.f_q,
        1.0 - result.f_q,
    )
    vacuum = battery.vacuum.trace
    trace = tuple(
        (float(t), int(k), float(p), 2.0 * float(p) - 1.0)
        for t, k, p in zip(vacuum.times, vacuum.segment_index, vacuum.excitation)
        if k in _PULSE_SEGMENTS
    )
    return PointResult(row=row, extra_rows=trace, diagnostics=result.diagnostics)


def _inversion_scan(config: ScenarioConfig, workers: int) -> ScenarioOutput:
    table, trace, points = _scan(
        config, workers, inversion_point, INVERSION_COLUMNS, INVERSION_TRACE_COLUMNS
    )
    summary: dict[str, Any] = {
        "points": len(points),
        "gain_decay": None,
        "noise_slope": None,
        "diagnostics": _diagnostics(points),
    }
    if config.sweep.parameter == "gamma_perp" and len(points) >= 3:
        rates = table.column("gamma_perp")
        t_mem = config.schedule.t_mem
        g0, t0 = fit_gain_decay(list(zip(rates, table.column("gain"))), t_mem)
        t_swap = float(table.column("t_swap")[0])
        reference = t_swap
        if config.pulses.kind == "sech":
            reference = (
                T0_PULSE_COEFFICIENT / config.pulses.beta_sech + T0_SWAP_COEFFICIENT * t_swap
            )
        summary["gain_decay"] = {
            "g0": g0,
            "t0": t0,
            "t_swap": t_swap,
            "t0_reference": reference,
            "relative_gain_reduction": config.physical.w * t0,
        }
        summary["noise_slope"] = fit_noise_slope(list(zip(rates, table.column("ren"))))
    tables = {"main": table}
    if trace is not None and config.output.write_trace:
        tables["trace"] = trace
    return ScenarioOutput(tables=tables, summary=summary)


# ------------------------------------------------------------------------ run-protocol

TRACE_COLUMNS = (
    Column("t", "1/w"),
    Column("segment"),
    Column("re_a_c"),
    Column("im_a_c"),
    Column("re_b"),
    Column("im_b"),
    Column("p_exc"),
    Column("resn"),
    Column("ren"),
)
BATTERY_COLUMNS = (
    Column("re_alpha"),
    Column("im_alpha"),
    Column("re_output"),
    Column("im_output"),
)


def _run_protocol(config: ScenarioConfig, workers: int) -> ScenarioOutput:
    params, grid, settings = _prepare(config)
    result, battery, schedule = _measure(config, params, grid, settings)
    psd = psd_summary(battery.vacuum.boundaries)
    summary = {
        "result": result.to_record(),
        "schedule": {
            "rule": schedule.rule.value,
            "durations": list(schedule.durations),
            "t_swap": schedule.t_swap,
            "t_swap_rev": schedule.t_swap_rev,
            "t_focus": schedule.t_focus,
            "t_focus_rev": schedule.t_focus_rev,
        },
        "grid": {
            "classes": grid.size,
            "d_delta": grid.d_delta,
            "delta_cut": grid.delta_cut,
            "revival_time": grid.revival_time,
        },
        "psd": {"checked": psd.checked, "min_eigenvalue": psd.min_eigenvalue},
        "output_offset": battery.offset,
    }
    tables = {
        "battery": Table(
            BATTERY_COLUMNS,
            [
                (a.real, a.imag, out.real, out.imag)
                for a, out in zip(battery.amplitudes, battery.outputs)
            ],
        )
    }
    if config.output.write_trace:
        traced = battery.probe or battery.vacuum
        tables["trace"] = Table(TRACE_COLUMNS, traced.trace.records())
    return ScenarioOutput(tables=tables, summary=summary)


# ---------------------------------------------------------------------------- validate

CONVERGENCE_COLUMNS = (
    Column("cut_over_gamma"),
    Column("classes"),
    Column("mean_error"),
    Column("variance_error"),
)
REVIVAL_COLUMNS = (
    Column("grid"),
    Column("t", "1/w"),
    Column("abs_b"),
    Column("baseline"),
)


def _revival(
    label: str,
    grid: FrequencyGrid,
    params: PhysicalParams,
    horizon: float,
    samples: int,
    rows: list[tuple[Any, ...]],
) -> RevivalReport:
    times = np.linspace(0.0, horizon, samples)
    b = free_induction(grid, params, times)
    baseline = revival_baseline(times, grid, params)
    rows.extend(
        (label, float(t), float(abs(v)), float(base)) for t, v, base in zip(times, b, baseline)
    )
    return detect_revival(times, b, grid, params)


def _revival_record(report: RevivalReport | None, t_mem: float) -> dict[str, Any] | None:
    if report is None:
        return None
    return {
        "detected": report.detected,
        "time": report.time,
        "expected_time": report.expected_time,
        "ratio": report.ratio,
        "within_t_mem": report.detected and report.time is not None and report.time <= t_mem,
    }


def _validate(config: ScenarioConfig, workers: int) -> ScenarioOutput:
    params = config.physical.to_params()
    t_mem = config.schedule.t_mem
    options = config.validation
    kappa = params.gamma if options.kappa is None else options.kappa

    points = convergence_scan(
        params,
        kappa,
        cuts=options.cuts,
        samples=options.samples,
        with_covariance=options.with_covariance,
        settings=config.numerics.integrator(),
    )
    mean_ok = is_monotone_decreasing(p.mean_error for p in points)
    variance_ok = None
    if options.with_covariance:
        variance_ok = is_monotone_decreasing(
            p.variance_error for p in points if p.variance_error is not None
        )
    if not mean_ok or variance_ok is False:
        logger.warning(
            "[event=convergence_not_monotone]",
            extra={"extra": {"mean": mean_ok, "variance": variance_ok}},
        )

    revival_rows: list[tuple[Any, ...]] = []
    configured = None
    if not config.grid.homogeneous:
        cut = config.grid.cut(params)
        grid = build_frequency_grid(
            params, cut, config.grid.spacing(t_mem), normalization=config.grid.normalization
        )
        horizon = max(t_mem, 1.1 * grid.revival_time)
        configured = _revival(
            "configured", grid, params, horizon, options.revival_samples, revival_rows
        )
        compliant_grid = build_frequency_grid(
            params, cut, auto_d_delta(t_mem), normalization=config.grid.normalization
        )
        compliant = _revival(
            "compliant", compliant_grid, params, t_mem, options.revival_samples, revival_rows
        )
    else:
        compliant = None

    psd = None
    if options.psd_check:
        run_params, run_grid, settings = _prepare(config)
        schedule = plan_protocol(
            t_mem,
            run_params,
            run_grid,
            config.schedule_spec(),
            config.schedule.rule,
            settings=settings.integrator,
        )
        vacuum = run_protocol(schedule, run_grid, run_params, 0j, settings=settings)
        summary_psd = psd_summary(vacuum.boundaries)
        psd = {
            "checked": summary_psd.checked,
            "min_eigenvalue": summary_psd.min_eigenvalue,
            "min_relative": summary_psd.min_relative,
            "time": summary_psd.time,
        }

    summary = {
        "convergence": {
            "kappa": kappa,
            "monotone_mean": mean_ok,
            "monotone_variance": variance_ok,
        },
        "revival": {
            "configured": _revival_record(configured, t_mem),
            "compliant": _revival_record(compliant, t_mem),
        },
        "psd": psd,
    }
    tables = {
        "convergence": Table(
            CONVERGENCE_COLUMNS,
            [(p.cut_over_gamma, p.classes, p.mean_error, p.variance_error) for p in points],
        )
    }
    if revival_rows and config.output.write_trace:
        tables["revival"] = Table(REVIVAL_COLUMNS, revival_rows)
    return ScenarioOutput(tables=tables, summary=summary)


_RUNNERS: dict[str, Callable[[ScenarioConfig, int], ScenarioOutput]] = {
    "swap-scan": _swap_scan,
    "decouple-scan": _decouple_scan,
    "inversion-scan": _inversion_scan,
    "run-protocol": _run_protocol,
    "validate": _validate,
}


def run_scenario(config: ScenarioConfig, *, workers: int = 1) -> ScenarioOutput:
    output = _RUNNERS[config.name](config, workers)
    logger.info(
        "[event=scenario_done]",
        extra={"extra": {"scenario": config.name, "tables": sorted(output.tables)}},
    )
    return output


@dataclass(frozen=True)
class WrittenFiles:
    tables: list[Path]
    summary: Path


def write_outputs(config: ScenarioConfig, output: ScenarioOutput, directory: Path) -> WrittenFiles:
    """One CSV per table plus ``<prefix>_summary.json`` with the config echo."""
    prefix = config.file_prefix
    tables: list[Path] = []
    for name in sorted(output.tables):
        table = output.tables[name]
        stem = prefix if name == "main" else f"{prefix}_{name}"
        tables.append(write_csv(directory / f"{stem}.csv", table.columns, table.rows))
    payload = {
        "scenario": config.name,
        "version": __version__,
        "config": config.model_dump(),
        "files": [path.name for path in tables],
        "summary": output.summary,
    }
    summary_path = write_json(directory / f"{prefix}_summary.json", payload)
    return WrittenFiles(tables=tables, summary=summary_path)
