from __future__ import annotations

import os
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from dotenv import load_dotenv

ENV_FILE = Path(".env")

_LOG_LEVELS = {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}
_LOG_FORMATS = {"json", "plain"}


def _as_bool(value: str | None, default: bool) -> bool:
    if value is None:
        return default
    return value.lower() in {"1", "true", "t", "yes", "y", "on"}


def _as_int(value: str | None, default: int) -> int:
    if value is None or not value.strip():
        return default
    return int(value)


@dataclass
class Settings:
    """进程级设置，只影响运行方式，不影响仿真结果。"""

    # Sweep worker pool
    WORKERS: int = 1

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "json"

    # Metrics & Observability
    ENABLE_METRICS: bool = True

    def __post_init__(self) -> None:
        if self.WORKERS < 1:
            raise ValueError("SPINMEM_WORKERS must be >= 1")
        self.LOG_LEVEL = self.LOG_LEVEL.upper()
        if self.LOG_LEVEL not in _LOG_LEVELS:
            raise ValueError(f"SPINMEM_LOG_LEVEL must be one of {sorted(_LOG_LEVELS)}")
        if self.LOG_FORMAT not in _LOG_FORMATS:
            raise ValueError(f"SPINMEM_LOG_FORMAT must be one of {sorted(_LOG_FORMATS)}")

    @classmethod
    def from_environment(cls) -> "Settings":
        load_dotenv(ENV_FILE, override=False)
        return cls(
            WORKERS=_as_int(os.environ.get("SPINMEM_WORKERS"), cls.WORKERS),
            LOG_LEVEL=os.environ.get("SPINMEM_LOG_LEVEL", cls.LOG_LEVEL),
            LOG_FORMAT=os.environ.get("SPINMEM_LOG_FORMAT", cls.LOG_FORMAT).lower(),
            ENABLE_METRICS=_as_bool(
                os.environ.get("SPINMEM_ENABLE_METRICS"), cls.ENABLE_METRICS
            ),
        )


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    return Settings.from_environment()
