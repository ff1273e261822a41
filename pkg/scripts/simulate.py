#!/usr/bin/env python3
"""Run one simulator scenario from a TOML config.

Usage:
  .venv/bin/python scripts/simulate.py swap-scan --config configs/swap_scan.toml
  .venv/bin/python scripts/simulate.py validate --config configs/validate.toml --out out/
  SPINMEM_WORKERS=4 .venv/bin/python scripts/simulate.py decouple-scan --config ...

Equivalent to ``python -m spinmem``.
"""

from __future__ import annotations

from spinmem.cli.main import main

if __name__ == "__main__":
    raise SystemExit(main())
