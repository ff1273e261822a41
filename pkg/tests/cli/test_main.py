from __future__ import annotations

import json
from pathlib import Path

import pytest

from spinmem.cli import build_parser, main
from spinmem.cli.main import EXIT_CONFIG, EXIT_OK, EXIT_SCHEDULE

# 单一频率类：几秒内跑完整个协议
FAST_PROTOCOL = """
scenario = "run-protocol"

[physical]
g_ens = {g_ens}
gamma_perp = 0.001

[grid]
homogeneous = true

[schedule]
t_mem = {t_mem}
decoupling = "hard"

[numerics]
samples_per_segment = 5

[battery]
count = 4
"""


def _write(tmp_path: Path, text: str, name: str = "scenario.toml") -> Path:
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def _fast(tmp_path: Path, *, g_ens: float = 1.25, t_mem: float = 20.0) -> Path:
    return _write(tmp_path, FAST_PROTOCOL.format(g_ens=g_ens, t_mem=t_mem))


def test_parser_requires_config():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["run-protocol"])


def test_parser_rejects_unknown_scenario():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["fly", "--config", "x.toml"])


def test_run_protocol_writes_tables_and_summary(tmp_path):
    out = tmp_path / "out"
    code = main(["run-protocol", "--config", str(_fast(tmp_path)), "--out", str(out)])
    assert code == EXIT_OK
    assert sorted(p.name for p in out.iterdir()) == [
        "run_protocol_battery.csv",
        "run_protocol_summary.json",
        "run_protocol_trace.csv",
    ]
    summary = json.loads((out / "run_protocol_summary.json").read_text(encoding="utf-8"))
    assert summary["scenario"] == "run-protocol"
    assert summary["config"]["schedule"]["t_mem"] == 20.0
    assert summary["files"] == ["run_protocol_battery.csv", "run_protocol_trace.csv"]
    durations = summary["summary"]["schedule"]["durations"]
    assert sum(durations) == pytest.approx(20.0)
    header = (out / "run_protocol_trace.csv").read_text(encoding="utf-8").splitlines()[0]
    assert header.startswith("t [1/w],segment [1]")


def test_identical_configs_give_identical_files(tmp_path):
    config = _fast(tmp_path)
    first, second = tmp_path / "a", tmp_path / "b"
    assert main(["run-protocol", "--config", str(config), "--out", str(first)]) == EXIT_OK
    assert main(["run-protocol", "--config", str(config), "--out", str(second)]) == EXIT_OK
    for path in first.iterdir():
        assert path.read_bytes() == (second / path.name).read_bytes()


def test_infeasible_schedule_exit_code(tmp_path):
    config = _fast(tmp_path, t_mem=1.0)
    assert main(["run-protocol", "--config", str(config), "--out", str(tmp_path)]) == EXIT_SCHEDULE


def test_overdamped_swap_exit_code(tmp_path):
    config = _fast(tmp_path, g_ens=0.1)
    assert main(["run-protocol", "--config", str(config), "--out", str(tmp_path)]) == EXIT_SCHEDULE


def test_memory_budget_exit_code(tmp_path):
    text = FAST_PROTOCOL.format(g_ens=1.25, t_mem=20.0).replace(
        "samples_per_segment = 5", "samples_per_segment = 5\nmemory_budget_gb = 1e-9"
    )
    config = _write(tmp_path, text)
    assert main(["run-protocol", "--config", str(config), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_bad_config_exit_code(tmp_path):
    config = _write(tmp_path, "[physical]\ng_ens = 1.0\n")
    assert main(["run-protocol", "--config", str(config)]) == EXIT_CONFIG


def test_missing_config_exit_code(tmp_path):
    assert main(["run-protocol", "--config", str(tmp_path / "none.toml")]) == EXIT_CONFIG


def test_scenario_mismatch_exit_code(tmp_path):
    assert main(["swap-scan", "--config", str(_fast(tmp_path))]) == EXIT_CONFIG


def test_invalid_worker_count(tmp_path):
    argv = ["run-protocol", "--config", str(_fast(tmp_path)), "--workers", "0"]
    assert main(argv) == EXIT_CONFIG


def test_invalid_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("SPINMEM_LOG_LEVEL", "chatty")
    assert main(["run-protocol", "--config", str(_fast(tmp_path))]) == EXIT_CONFIG


def test_metrics_file_written(tmp_path):
    metrics = tmp_path / "metrics.prom"
    args = ["run-protocol", "--config", str(_fast(tmp_path)), "--out", str(tmp_path / "o")]
    assert main([*args, "--metrics-file", str(metrics)]) == EXIT_OK
    assert "spinmem_protocol_runs_total" in metrics.read_text()


def test_metrics_disabled(tmp_path, monkeypatch):
    monkeypatch.setenv("SPINMEM_ENABLE_METRICS", "false")
    metrics = tmp_path / "metrics.prom"
    args = ["run-protocol", "--config", str(_fast(tmp_path)), "--out", str(tmp_path / "o")]
    assert main([*args, "--metrics-file", str(metrics)]) == EXIT_OK
    assert not metrics.exists()
