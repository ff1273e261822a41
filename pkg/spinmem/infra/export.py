from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

_FLOAT_FORMAT = "{:.12e}"


@dataclass(frozen=True, slots=True)
class Column:
    name: str
    unit: str = "1"

    @property
    def header(self) -> str:
        return f"{self.name} [{self.unit}]"


def format_cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return _FLOAT_FORMAT.format(value)
    if value is None:
        return ""
    return str(value)


def write_csv(path: Path, columns: Sequence[Column], rows: Iterable[Sequence[Any]]) -> Path:
    """Comma separated, UTF-8, LF endings, scientific notation, units in the header."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow([column.header for column in columns])
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f"row has {len(row)} cells, expected {len(columns)}")
            writer.writerow([format_cell(cell) for cell in row])
    return path


def to_jsonable(value: Any) -> Any:
    if isinstance(value, Mapping):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (complex, np.complexfloating)):
        return {"re": to_jsonable(float(value.real)), "im": to_jsonable(float(value.imag))}
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isfinite(value):
            return value
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, Path):
        return value.as_posix()
    if hasattr(value, "value") and isinstance(getattr(value, "value"), str):
        return value.value
    return value


def write_json(path: Path, payload: Mapping[str, Any]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(to_jsonable(payload), ensure_ascii=False, indent=2, sort_keys=True)
    path.write_text(text + "\n", encoding="utf-8", newline="\n")
    return path
