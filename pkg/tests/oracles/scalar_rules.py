"""Independent scalar oracle for the plasticity arithmetic.

Everything here is computed with exact rational arithmetic
(fractions.Fraction) or high-precision floats (mpmath), never with the
package's own code, so agreement between the two routes is meaningful.
"""

from __future__ import annotations

import math
from fractions import Fraction

import mpmath

FP_ONE = 4096
NSM_FLOOR = -4096  # numeric saturation floor for the disable rule's weight


def exact_retain_fp(decay_tau) -> int:
    """floor(exp(-1/tau) * 4096 + 1/2) at 60 significant digits."""
    with mpmath.workdps(60):
        value = mpmath.exp(-1 / mpmath.mpf(decay_tau)) * FP_ONE + mpmath.mpf("0.5")
        return int(mpmath.floor(value))


def exact_to_fixed(value) -> int:
    return math.floor(Fraction(value) * FP_ONE + Fraction(1, 2))


def exact_fixed_mul(raw: int, factor: int) -> int:
    # floor((raw*factor + 2048) / 4096), i.e. round half up in Q12
    return (raw * factor + FP_ONE // 2) >> 12


def exact_trace_sequence(impulse, decay_tau, spikes) -> list[int]:
    """Raw Q12 trace after each step of a boolean spike train."""
    retain = exact_retain_fp(decay_tau)
    imp = exact_to_fixed(impulse)
    raw = 0
    out = []
    for s in spikes:
        raw = exact_fixed_mul(raw, retain)
        if s:
            raw += imp
        out.append(raw)
    return out


def exact_pattern_delta(x1_raw: int, w: int, alpha, rate, w_max: int, w_min: int) -> Fraction:
    x1 = Fraction(x1_raw, FP_ONE)
    return (x1 - Fraction(alpha)) * (w_max - w) * (w - w_min) * Fraction(rate)


def exact_nsm_delta(x1_raw: int, w: int, alpha, rate, fatigue, w_max: int) -> Fraction:
    x1 = Fraction(x1_raw, FP_ONE)
    return (Fraction(alpha) - x1) * (w_max - w) * Fraction(rate) - x1 * Fraction(fatigue)


def exact_weight_step(delta: Fraction) -> int:
    if delta == 0:
        return 0
    stepped = int(delta)  # Fraction truncates toward zero
    if stepped == 0:
        return 1 if delta > 0 else -1
    return stepped


def exact_apply(w: int, x1_raw: int, rule: dict) -> int:
    """One postsynaptic-spike update on a plain-dict rule description."""
    if rule["kind"] == "pattern":
        delta = exact_pattern_delta(
            x1_raw, w, rule["alpha"], rule["rate"], rule["w_max"], rule["w_min"]
        )
        w = w + exact_weight_step(delta)
        return min(max(w, rule["w_min"]), rule["w_max"])
    delta = exact_nsm_delta(
        x1_raw, w, rule["alpha"], rule["rate"], rule["fatigue"], rule["w_max"]
    )
    return max(min(w + exact_weight_step(delta), rule["w_max"]), NSM_FLOOR)
