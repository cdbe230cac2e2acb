"""Spike-driven local plasticity: presynaptic traces and weight-update rules.

Every quantity that evolves over time lives on a fixed-point grid so that
simulations are bit-identical across platforms.  Presynaptic traces use
unsigned Q12 (12 fractional bits); their exponential decay is precomputed as
a Q12 multiplier.  Weights are plain integers.  The unrounded weight deltas
are exact in float64 because every factor is a dyadic rational with far fewer
than 53 mantissa bits, so no platform-dependent rounding can occur.

Two rules are provided:

* pattern rule -- soft-bounded Hebbian update applied on postsynaptic spikes:
  ``delta = (x1 - alpha) * (w_max - w) * (w - w_min) * rate``.  Both rails are
  fixed points; the sign follows the presynaptic trace against ``alpha``.
* disable rule -- used by the allocation units to burn out their own drive:
  ``delta = (alpha - x1) * (w_max - w) * rate - x1 * fatigue``.  Attracting
  toward ``w_max`` while the trace is below ``alpha`` and strictly negative
  once it has crossed, so a unit that stays active long enough removes itself.

Deltas are rounded toward zero, with a minimum magnitude of 1 whenever the
unrounded delta is nonzero (otherwise soft-bounded updates stall one step
from the rail).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

FP_BITS = 12
FP_ONE = 1 << FP_BITS
_FP_HALF = FP_ONE >> 1

# Saturation floor for disable-rule weights.  The rule has no semantic lower
# rail, but its melt step grows with |w|, so an uncapped weight could run away
# numerically.  In practice a spent unit settles a few units below zero; the
# floor only exists so storage widths can be bounded, like the membrane
# saturation limits in the engine.
NSM_WEIGHT_FLOOR = -FP_ONE


def decay_retain_fp(decay_tau: float) -> int:
    """Q12 multiplier for exp(-1/decay_tau), computed platform-independently.

    libm exp() may differ in the last ulp across platforms, which would break
    bit-identical runs, so the exponential is evaluated as an exact rational
    Taylor series and only then quantized.
    """
    if decay_tau < 1:
        raise ValueError("decay_tau must be >= 1 timestep")
    x = -1 / Fraction(decay_tau)
    total = Fraction(0)
    term = Fraction(1)
    k = 0
    while abs(term) > Fraction(1, 1 << 40):
        total += term
        k += 1
        term *= x / k
    return math.floor(total * FP_ONE + Fraction(1, 2))


def to_fixed(value: float) -> int:
    """Quantize a non-negative real to the Q12 grid (round half up)."""
    if value < 0:
        raise ValueError("trace quantities are unsigned")
    return math.floor(value * FP_ONE + 0.5)


def from_fixed(raw: int) -> float:
    return raw / FP_ONE


def fixed_mul(raw: int, factor: int) -> int:
    """Multiply a raw fixed-point value by a Q12 factor, rounding half up."""
    return (raw * factor + _FP_HALF) >> FP_BITS


@dataclass(frozen=True)
class TraceConfig:
    """Presynaptic trace parameters.

    impulse: amount added to the trace on each presynaptic spike.
    decay_tau: time constant in timesteps; per-step retain factor is
        exp(-1/decay_tau), quantized to Q12.
    """

    impulse: float
    decay_tau: float

    def __post_init__(self) -> None:
        if self.impulse < 0:
            raise ValueError("impulse must be non-negative")
        if self.decay_tau < 1:
            raise ValueError("decay_tau must be >= 1 timestep")

    @property
    def impulse_fp(self) -> int:
        return to_fixed(self.impulse)

    @property
    def retain_fp(self) -> int:
        return decay_retain_fp(self.decay_tau)


def update_trace(x1: float, presyn_spiked: bool, cfg: TraceConfig) -> float:
    """One timestep of trace evolution; x1 is (re)quantized to Q12."""
    raw = fixed_mul(to_fixed(x1), cfg.retain_fp)
    if presyn_spiked:
        raw += cfg.impulse_fp
    return from_fixed(raw)


@dataclass(frozen=True)
class PatternRule:
    """Soft-bounded Hebbian rule with two rails."""

    alpha: float
    rate: float
    w_max: int
    w_min: int

    def __post_init__(self) -> None:
        if not self.w_min < 0 < self.w_max:
            raise ValueError("rails must straddle zero")
        if self.alpha <= 0 or self.rate <= 0:
            raise ValueError("alpha and rate must be positive")


@dataclass(frozen=True)
class NsmRule:
    """Self-disabling rule for allocation-unit drive synapses.

    Only the upper rail is a semantic clamp; the weight is free to fall below
    zero, which is what keeps a spent unit from ever winning again.  Far below
    zero the weight saturates at ``NSM_WEIGHT_FLOOR`` -- a numeric guard, not
    a rail the dynamics ever approach.
    """

    alpha: float
    rate: float
    fatigue: float
    w_max: int

    def __post_init__(self) -> None:
        if self.alpha <= 0 or self.rate <= 0 or self.fatigue <= 0:
            raise ValueError("alpha, rate and fatigue must be positive")


def pattern_delta(x1: float, w: int, rule: PatternRule) -> float:
    """Unrounded pattern-rule delta; exact in float64 for Q12 inputs."""
    return (x1 - rule.alpha) * (rule.w_max - w) * (w - rule.w_min) * rule.rate


def nsm_delta(x1: float, w: int, rule: NsmRule) -> float:
    """Unrounded disable-rule delta; exact in float64 for Q12 inputs."""
    return (rule.alpha - x1) * (rule.w_max - w) * rule.rate - x1 * rule.fatigue


def weight_step(delta: float) -> int:
    """Round a delta toward zero, forcing magnitude >= 1 when nonzero."""
    if delta == 0.0:
        return 0
    stepped = math.trunc(delta)
    if stepped == 0:
        return 1 if delta > 0 else -1
    return int(stepped)


@dataclass(frozen=True)
class PlasticSynapse:
    """Scalar view of one plastic synapse: weight, trace, and its rule."""

    weight: int
    trace: float
    rule: PatternRule | NsmRule
    trace_cfg: TraceConfig

    def __post_init__(self) -> None:
        if isinstance(self.rule, PatternRule):
            if not self.rule.w_min <= self.weight <= self.rule.w_max:
                raise ValueError("weight outside rails")
        else:
            if not NSM_WEIGHT_FLOOR <= self.weight <= self.rule.w_max:
                raise ValueError("weight outside upper rail / saturation floor")


def tick_trace(syn: PlasticSynapse, presyn_spiked: bool) -> PlasticSynapse:
    return replace(syn, trace=update_trace(syn.trace, presyn_spiked, syn.trace_cfg))


def apply_on_post_spike(syn: PlasticSynapse) -> PlasticSynapse:
    """Apply one postsynaptic-spike weight update; the trace is untouched."""
    if isinstance(syn.rule, PatternRule):
        delta = pattern_delta(syn.trace, syn.weight, syn.rule)
        w = syn.weight + weight_step(delta)
        w = min(max(w, syn.rule.w_min), syn.rule.w_max)
    else:
        delta = nsm_delta(syn.trace, syn.weight, syn.rule)
        w = min(syn.weight + weight_step(delta), syn.rule.w_max)
        w = max(w, NSM_WEIGHT_FLOOR)
    return replace(syn, weight=w)
