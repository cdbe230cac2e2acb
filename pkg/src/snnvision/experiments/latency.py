"""Latency measurements: recognition switching and learning convergence.

A switch trial presents pattern A (with the usual motor-covered gap), then
replaces it with pattern B on the next step — no gap, no motor. Switch
latency is read from per-step WTA counts:

* If the correct group's trailing-window count is strictly dominant (at or
  above the decision floor) at every step since the switch, dominance was
  never lost and the latency is 0 (the self-switch case).
* Otherwise the trailing window is clipped at the switch, so the old
  pattern's spikes never count, and the latency is the first step of the
  final unbroken run of strict dominance — dominance must be achieved and
  then retained through the end of the presentation, so a transient never
  reads as the decision. No such run means no latency (None).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..architecture.builder import BuildResult
from ..engine import Simulator
from ..events import SynthPattern, synthesize
from .protocol import (
    ExperimentError,
    Protocol,
    derive_seed,
    group_columns,
    pattern_name,
    presentation_forced,
    resolve_patterns,
)


@dataclass(frozen=True)
class SwitchSample:
    from_pattern: str
    to_pattern: str
    to_group: int
    latency: int | None


@dataclass(frozen=True)
class LatencyReport:
    switches: tuple[SwitchSample, ...]
    learning_convergence_steps: tuple[int, ...]
    switch_duration: int

    @property
    def switch_latencies(self) -> dict[tuple[str, str], int | None]:
        return {(s.from_pattern, s.to_pattern): s.latency for s in self.switches}


def switch_latency(
    counts: np.ndarray,
    switch_row: int,
    target: int,
    window: int,
    floor: int,
) -> int | None:
    """Apply the two-branch dominance rule to per-step per-group counts.

    ``counts`` rows are steps, columns are groups; ``switch_row`` is the
    first row of the new pattern. Returns 0 if the unclipped trailing
    window stays dominant at every step since the switch; otherwise the
    1-based start of the final unbroken dominant run of the switch-clipped
    trailing window, or None if the run never reaches the last step.
    """
    n_steps = counts.shape[0]
    if not 0 <= switch_row < n_steps:
        raise ExperimentError("switch_row outside the counts array")
    cum = np.cumsum(counts, axis=0)

    def window_counts(row: int, start: int) -> np.ndarray:
        lo = max(start, row - window + 1)
        base = cum[lo - 1] if lo > 0 else 0
        return cum[row] - base

    def dominant(c: np.ndarray) -> bool:
        top = c.max()
        return bool(top >= floor and (c == top).sum() == 1 and c.argmax() == target)

    never_lost = all(
        dominant(window_counts(row, start=0)) for row in range(switch_row, n_steps)
    )
    if never_lost:
        return 0
    ok = np.array(
        [dominant(window_counts(row, start=switch_row)) for row in range(switch_row, n_steps)]
    )
    if not ok[-1]:
        return None
    false_rows = np.flatnonzero(~ok)
    first_of_final_run = int(false_rows[-1]) + 1 if false_rows.shape[0] else 0
    return first_of_final_run + 1


def measure_latencies(
    built: BuildResult,
    weights: np.ndarray,
    patterns: Sequence[str | SynthPattern],
    protocol: Protocol,
    seed: int,
    *,
    labels: Sequence[int] | None = None,
    convergence_steps: Sequence[int] = (),
    switch_duration: int = 1_000,
    include_self: bool = False,
) -> LatencyReport:
    """Measure switch latency for every ordered pair of trained patterns.

    Each pair runs on a fresh simulator with the trained weights loaded.
    ``convergence_steps`` (from the training report or a trained-state
    file) is carried through so the report holds both latency families.
    """
    pats = resolve_patterns(patterns)
    net, handles = built.network, built.handles
    if labels is None:
        labels = list(range(len(pats)))
    if len(labels) != len(pats):
        raise ExperimentError("labels and patterns differ in length")
    wta_cols = group_columns(net, "wta_g")

    samples: list[SwitchSample] = []
    pair_index = 0
    for a, pat_a in enumerate(pats):
        for b, pat_b in enumerate(pats):
            if a == b and not include_self:
                continue
            sim = Simulator(net, seed=derive_seed(seed, pair_index, 3))
            sim.load_weights_by_syn_id(weights)

            binned_a = synthesize(pat_a, switch_duration, seed=derive_seed(seed, pair_index))
            forced_a = presentation_forced(
                binned_a,
                handles.input_ids,
                handles.motor,
                0,
                protocol.gap_duration,
                protocol.settle_duration,
            )
            result_a = sim.run(
                protocol.gap_duration + switch_duration, forced_spikes=forced_a
            )

            switch_at = result_a.t_start + result_a.n_steps
            binned_b = synthesize(pat_b, switch_duration, seed=derive_seed(seed, pair_index, 1))
            result_b = sim.run(
                switch_duration,
                forced_spikes=binned_b.to_forced(handles.input_ids, t_offset=switch_at),
            )

            counts = np.concatenate(
                [result_a.spike_counts[:, wta_cols], result_b.spike_counts[:, wta_cols]]
            )
            samples.append(
                SwitchSample(
                    from_pattern=pattern_name(pat_a),
                    to_pattern=pattern_name(pat_b),
                    to_group=int(labels[b]),
                    latency=switch_latency(
                        counts,
                        switch_row=result_a.n_steps,
                        target=int(labels[b]),
                        window=protocol.decision_window,
                        floor=protocol.decision_floor,
                    ),
                )
            )
            pair_index += 1

    return LatencyReport(
        switches=tuple(samples),
        learning_convergence_steps=tuple(int(c) for c in convergence_steps),
        switch_duration=switch_duration,
    )
