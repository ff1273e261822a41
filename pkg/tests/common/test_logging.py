from __future__ import annotations

import json
import logging

import numpy as np

from spinmem.common.logging import STARTUP_LOGGER, JsonFormatter, setup_logging


def _record(message: str, **extra) -> logging.LogRecord:
    record = logging.LogRecord("spinmem.test", logging.INFO, __file__, 1, message, None, None)
    for key, value in extra.items():
        setattr(record, key, value)
    return record


def test_json_formatter_merges_extra_fields():
    record = _record("[event=protocol_planned]", extra={"t_mem": 20.0, "rule": "symmetric"})
    payload = json.loads(JsonFormatter().format(record))
    assert payload["message"] == "[event=protocol_planned]"
    assert payload["level"] == "INFO"
    assert payload["logger"] == "spinmem.test"
    assert payload["t_mem"] == 20.0
    assert payload["rule"] == "symmetric"


def test_json_formatter_keeps_non_ascii():
    text = JsonFormatter().format(_record("频率网格"))
    assert "频率网格" in text


def test_json_formatter_stringifies_unknown_values():
    payload = json.loads(JsonFormatter().format(_record("x", extra={"amp": 1 + 2j})))
    assert payload["amp"] == "(1+2j)"


def test_startup_logger_does_not_propagate():
    setup_logging("WARNING", "plain")
    try:
        assert logging.getLogger(STARTUP_LOGGER).propagate is False
        assert logging.getLogger().level == logging.WARNING
    finally:
        setup_logging()


def test_json_formatter_unwraps_numpy_values():
    record = _record("x", extra={"rate": np.float64(0.25), "gains": np.array([0.9, 0.8])})
    payload = json.loads(JsonFormatter().format(record))
    assert payload["rate"] == 0.25
    assert payload["gains"] == [0.9, 0.8]
    assert "time" in payload
