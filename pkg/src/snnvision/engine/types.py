"""Core value types for the discrete-timestep simulator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

FP_BITS = 12
FP_ONE = 1 << FP_BITS

SAT_MAX = 2**31 - 1
SAT_MIN = -(2**31 - 1)


class StructuralError(ValueError):
    """Malformed network description: bad ids, bounds, or schedules."""


def retain_fp(decay: float) -> int:
    """Q12 multiplier for one step of leak: round((1 - decay) * 4096)."""
    if not 0.0 <= decay <= 1.0:
        raise StructuralError(f"decay {decay} outside [0, 1]")
    return math.floor((1.0 - decay) * FP_ONE + 0.5)


@dataclass(frozen=True)
class CompartmentParams:
    """Static parameters of one two-state integrate-and-fire compartment.

    Current and voltage leak by fixed-point multiplication each step:
    u <- round(u * (1 - current_decay)) + arrivals + bias
    v <- round(v * (1 - voltage_decay)) + u
    A spike is emitted when v reaches threshold outside the refractory
    window; v is reset to 0 on the spike step and held at 0 while the
    refractory counter runs.
    """

    threshold: int
    bias: int = 0
    current_decay: float = 1.0
    voltage_decay: float = 1.0
    refractory_period: int = 0

    def __post_init__(self) -> None:
        if self.threshold <= 0:
            raise StructuralError("threshold must be positive")
        if self.threshold > SAT_MAX:
            raise StructuralError("threshold beyond the saturation bound")
        if abs(self.bias) > SAT_MAX:
            raise StructuralError("bias beyond the saturation bound")
        if not 0 <= self.refractory_period <= SAT_MAX:
            raise StructuralError("refractory_period outside [0, saturation bound]")
        retain_fp(self.current_decay)
        retain_fp(self.voltage_decay)

    @property
    def current_retain_fp(self) -> int:
        return retain_fp(self.current_decay)

    @property
    def voltage_retain_fp(self) -> int:
        return retain_fp(self.voltage_decay)


@dataclass(frozen=True)
class CompartmentState:
    """Dynamic state of one compartment at the end of a timestep."""

    u: int
    v: int
    refractory_remaining: int


@dataclass(frozen=True)
class SynapseSpec:
    """Introspection view of one synapse."""

    syn_id: int
    pre: int
    post: int
    weight: int
    delay: int
    rule_id: int  # -1 for fixed synapses


@dataclass(frozen=True)
class SpikeGenerator:
    """Forces a neuron to emit spikes at the scheduled absolute timesteps."""

    neuron_id: int
    schedule: np.ndarray

    def __post_init__(self) -> None:
        sched = np.asarray(self.schedule, dtype=np.int64)
        object.__setattr__(self, "schedule", sched)
        if sched.ndim != 1:
            raise StructuralError("schedule must be one-dimensional")
        if sched.size and (np.any(np.diff(sched) <= 0) or sched[0] < 0):
            raise StructuralError("schedule must be strictly increasing and >= 0")


@dataclass
class ProbeRecord:
    """Samples collected for one probed neuron or synapse.

    kind: "spike" | "voltage" | "weight"
    samples: (k, 2) array of (timestep, value); spike probes carry value 1
    at spike timesteps only, the other kinds sample every step.
    """

    kind: str
    target: int
    samples: np.ndarray = field(default_factory=lambda: np.empty((0, 2), dtype=np.int64))
