"""Presentation protocol: timing, motor cover, and seed derivation.

A presentation is one block of ``gap_duration`` blank steps followed by
``duration`` steps of pattern input. The motor neuron is forced on every
step of the gap and through the first ``settle_duration`` pattern steps, so
the learning pathway is held closed across the boundary: the gap supplies
the required motor pulse between consecutive presentations, and the cover
from the very first step masks the two-step loop delay of the inhibition
that would otherwise let allocation gates blip at startup.

Every experiment is a pure function of (config, seeds): all randomness is
derived from an explicit trial seed through ``derive_seed``, and trials are
executed in a fixed order, so reruns reproduce every number bit-exactly.
Independent trials share no state and could run in separate processes; the
reduction order over (level, seed) grids is fixed either way.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..events import SynthPattern


class ExperimentError(ValueError):
    """Invalid experiment setup or a violated run-structure guarantee."""


@dataclass(frozen=True)
class Protocol:
    """Timing and decision parameters shared by all experiments.

    Durations are in timesteps (4 kHz grid: 4,000 steps = 1 s).
    ``decision_window`` is the trailing window used for classification;
    a decision requires a strictly greatest count of at least
    ``decision_floor`` spikes, otherwise the trial reads "no decision".
    """

    train_duration: int = 4_000
    eval_duration: int = 10_000
    gap_duration: int = 400
    settle_duration: int = 200
    decision_window: int = 400
    decision_floor: int = 10
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5, 6, 7, 8, 9, 10)

    def __post_init__(self) -> None:
        for name in ("train_duration", "eval_duration", "gap_duration"):
            if getattr(self, name) <= 0:
                raise ExperimentError(f"{name} must be > 0")
        if self.settle_duration < 0:
            raise ExperimentError("settle_duration must be >= 0")
        if self.settle_duration >= min(self.train_duration, self.eval_duration):
            raise ExperimentError("settle_duration must fit inside a presentation")
        if self.decision_window <= 0 or self.decision_floor <= 0:
            raise ExperimentError("decision window and floor must be > 0")
        if not self.seeds:
            raise ExperimentError("seeds must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ExperimentError("seeds must be distinct")


def derive_seed(trial_seed: int, *key: int) -> int:
    """Deterministic sub-seed for one draw site inside a trial.

    Distinct key tuples give statistically independent streams, so pattern
    synthesis, injected noise, and parameter jitter never share draws.
    """
    ss = np.random.SeedSequence((int(trial_seed),) + tuple(int(k) for k in key))
    return int(ss.generate_state(1)[0])


def resolve_patterns(patterns: Sequence[str | SynthPattern]) -> tuple[SynthPattern, ...]:
    """Accept shape names or full pattern specs; names get default placement."""
    out = []
    for p in patterns:
        out.append(SynthPattern(shape=p) if isinstance(p, str) else p)
    return tuple(out)


def pattern_name(pattern: SynthPattern) -> str:
    if pattern.scale == 5 and pattern.position == (0, 0):
        return pattern.shape
    return f"{pattern.shape}@s{pattern.scale}{pattern.position}"


def presentation_forced(
    binned,
    input_ids: np.ndarray,
    motor_id: int,
    t_start: int,
    gap_duration: int,
    settle_duration: int,
) -> dict[int, list[int]]:
    """Forced-spike schedule for one presentation starting at ``t_start``.

    The pattern occupies [t_start + gap, t_start + gap + duration); the
    motor neuron fires on [t_start, t_start + gap + settle).
    """
    forced = binned.to_forced(input_ids, t_offset=t_start + gap_duration)
    for t in range(t_start, t_start + gap_duration + settle_duration):
        forced.setdefault(t, []).append(int(motor_id))
    return forced


def decide(counts: np.ndarray, floor: int) -> int | None:
    """Strict argmax with a minimum-count floor; ties read as no decision."""
    counts = np.asarray(counts)
    if counts.size == 0:
        return None
    top = int(counts.max())
    if top < floor:
        return None
    winners = np.flatnonzero(counts == top)
    if winners.shape[0] != 1:
        return None
    return int(winners[0])


def group_columns(network, prefix: str) -> np.ndarray:
    """Column indices of the per-group count populations named prefix+str(g)."""
    names = list(network.group_names)
    cols = []
    g = 0
    while f"{prefix}{g}" in names:
        cols.append(names.index(f"{prefix}{g}"))
        g += 1
    if not cols:
        raise ExperimentError(f"no populations named {prefix}<g>")
    return np.asarray(cols, dtype=np.int64)
