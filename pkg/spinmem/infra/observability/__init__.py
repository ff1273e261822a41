from spinmem.infra.observability.metrics import (
    PROTOCOL_RUNS,
    SEGMENTS,
    observe_integration,
    write_metrics,
)

__all__ = ["PROTOCOL_RUNS", "SEGMENTS", "observe_integration", "write_metrics"]
