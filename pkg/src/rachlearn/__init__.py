"""Slot-accurate simulator and analytics for urgent-message preamble
reallocation driven by finite-memory multi-state sequential learning."""

from ._accel import NUMBA_ENABLED, backend_name
from .analytics import PreambleSplit, RunStats
from .engine import AggregateMetrics, MetricsRecord, RunRejectedError, SimConfig, monte_carlo, run

__all__ = [
    "NUMBA_ENABLED",
    "backend_name",
    "PreambleSplit",
    "RunStats",
    "SimConfig",
    "MetricsRecord",
    "AggregateMetrics",
    "RunRejectedError",
    "run",
    "monte_carlo",
]

__version__ = "0.1.0"
