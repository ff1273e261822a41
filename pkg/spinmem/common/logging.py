"""进程日志：根 logger 输出 JSON 行，启动横幅走独立的纯文本 logger。"""

import json
import logging
from logging.config import dictConfig
from pathlib import Path
from typing import Any

import numpy as np

STARTUP_LOGGER = "spinmem.startup"

__all__ = ["STARTUP_LOGGER", "JsonFormatter", "setup_logging"]


def setup_logging(level: str = "INFO", fmt: str = "json") -> None:
    """Install handlers on stderr; stdout stays free for the scenario outputs."""
    handler = {"class": "logging.StreamHandler", "stream": "ext://sys.stderr"}
    dictConfig(
        {
            "version": 1,
            "disable_existing_loggers": False,
            "formatters": {
                "json": {"()": JsonFormatter},
                "plain": {"format": "%(levelname)s %(name)s: %(message)s"},
            },
            "handlers": {
                "console": {**handler, "formatter": fmt},
                "startup_console": {**handler, "formatter": "plain"},
            },
            "root": {"level": level, "handlers": ["console"]},
            "loggers": {
                STARTUP_LOGGER: {
                    "handlers": ["startup_console"],
                    "level": "INFO",
                    "propagate": False,
                },
            },
        }
    )


def _json_default(value: Any) -> Any:
    # numpy 标量与数组来自数值层，其余类型（含 complex）退化为字符串
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        item = value.item()
        return item if isinstance(item, (bool, int, float)) else str(item)
    if isinstance(value, Path):
        return value.as_posix()
    return str(value)


class JsonFormatter(logging.Formatter):
    """One JSON object per line; fields come from ``extra={"extra": {...}}``."""

    def format(self, record: logging.LogRecord) -> str:
        payload: dict[str, Any] = {
            "time": self.formatTime(record, "%Y-%m-%dT%H:%M:%S"),
            "level": record.levelname,
            "logger": record.name,
            "message": record.getMessage(),
        }
        fields = getattr(record, "extra", None)
        if isinstance(fields, dict):
            payload.update(fields)
        if record.exc_info:
            payload["exc_info"] = self.formatException(record.exc_info)
        return json.dumps(payload, ensure_ascii=False, default=_json_default)
