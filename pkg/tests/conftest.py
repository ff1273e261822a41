from __future__ import annotations

import pytest

from spinmem.common.config import get_settings
from spinmem.domain import FrequencyGrid, PhysicalParams, build_frequency_grid
from spinmem.infra.integrator import IntegratorSettings

# 与示例配置一致：w = 1，Γ = 0.5，N 取大值保证线性区
N_SPINS = 1e12


@pytest.fixture(autouse=True)
def _fresh_settings(monkeypatch: pytest.MonkeyPatch):
    for name in (
        "SPINMEM_WORKERS",
        "SPINMEM_LOG_LEVEL",
        "SPINMEM_LOG_FORMAT",
        "SPINMEM_ENABLE_METRICS",
    ):
        monkeypatch.delenv(name, raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def params() -> PhysicalParams:
    return PhysicalParams.from_ensemble_coupling(1.25, n_spins=N_SPINS)


@pytest.fixture
def homogeneous_grid(params: PhysicalParams) -> FrequencyGrid:
    return build_frequency_grid(params, 0.0, 0.0)


@pytest.fixture
def small_grid(params: PhysicalParams) -> FrequencyGrid:
    # Δcut = 10Γ，dΔ 满足 t_mem = 10 的分辨率要求
    return build_frequency_grid(params, 5.0, 2.0 * 3.141592653589793 / 40.0)


@pytest.fixture
def tight() -> IntegratorSettings:
    return IntegratorSettings(rtol=1e-11, atol=1e-13)
