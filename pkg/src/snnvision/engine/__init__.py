"""Deterministic fixed-timestep spiking network engine."""

from .network import RULE_NSM, RULE_PATTERN, NetworkBuilder, NetworkSpec
from .simulator import CurrentNoise, RunResult, Simulator, run
from .types import (
    FP_BITS,
    FP_ONE,
    SAT_MAX,
    SAT_MIN,
    CompartmentParams,
    CompartmentState,
    ProbeRecord,
    SpikeGenerator,
    StructuralError,
    retain_fp,
)

__all__ = [
    "FP_BITS",
    "FP_ONE",
    "SAT_MAX",
    "SAT_MIN",
    "CompartmentParams",
    "CompartmentState",
    "CurrentNoise",
    "NetworkBuilder",
    "NetworkSpec",
    "ProbeRecord",
    "RULE_NSM",
    "RULE_PATTERN",
    "RunResult",
    "SpikeGenerator",
    "Simulator",
    "StructuralError",
    "retain_fp",
    "run",
]
