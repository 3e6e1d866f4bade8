"""Throughput prediction for coarse-grained locking, with a simulator oracle and CLH benchmarks."""
from lockperf.model import (
    MachineParams,
    ModelId,
    Prediction,
    Regime,
    WorkloadParams,
    classify_regime,
    knee_multiplier,
    predict_clh,
    predict_queue_model,
)
from lockperf.sim import SimConfig, SimResult, simulate

__all__ = [
    "MachineParams",
    "ModelId",
    "Prediction",
    "Regime",
    "SimConfig",
    "SimResult",
    "WorkloadParams",
    "classify_regime",
    "knee_multiplier",
    "predict_clh",
    "predict_queue_model",
    "simulate",
]
