from __future__ import annotations

import json
import math

import numpy as np
import pytest

from spinmem.domain import CouplingMode
from spinmem.infra.export import Column, format_cell, to_jsonable, write_csv, write_json


def test_header_carries_units(tmp_path):
    path = write_csv(
        tmp_path / "out" / "table.csv",
        [Column("t", "1/w"), Column("gain")],
        [(0.5, 1), (1.0, 2)],
    )
    lines = path.read_text(encoding="utf-8").split("\n")
    assert lines[0] == "t [1/w],gain [1]"
    assert lines[1] == "5.000000000000e-01,1"
    assert lines[-1] == ""


def test_row_width_checked(tmp_path):
    with pytest.raises(ValueError, match="cells"):
        write_csv(tmp_path / "bad.csv", [Column("a")], [(1.0, 2.0)])


def test_format_cell():
    assert format_cell(True) == "true"
    assert format_cell(np.int64(3)) == "3"
    assert format_cell(math.nan) == "nan"
    assert format_cell(-math.inf) == "-inf"
    assert format_cell(None) == ""
    assert format_cell("x") == "x"


def test_to_jsonable_handles_numpy_and_complex():
    payload = to_jsonable(
        {
            "array": np.array([1.0, 2.0]),
            "amp": 1 + 2j,
            "mode": CouplingMode.COUPLED,
            "bad": math.inf,
        }
    )
    assert payload == {
        "array": [1.0, 2.0],
        "amp": {"re": 1.0, "im": 2.0},
        "mode": "coupled",
        "bad": "inf",
    }


def test_json_is_sorted_and_terminated(tmp_path):
    path = write_json(tmp_path / "summary.json", {"b": 1, "a": np.float64(0.25)})
    text = path.read_text(encoding="utf-8")
    assert text.endswith("\n")
    assert list(json.loads(text)) == ["a", "b"]
