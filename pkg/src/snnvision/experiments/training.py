"""Training runs: one presentation per pattern, episode accounting.

Each novel pattern should trigger exactly one learning episode (one
allocation unit ignites, the stimulated group's plastic weights drive to a
rail). A presentation that instead re-activates an already-trained group is
recorded as recognized; a presentation that triggers neither is a capacity
failure (every allocation unit already spent).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..architecture.builder import BuildResult
from ..engine import ProbeRecord, Simulator
from ..events import SynthPattern, synthesize
from .protocol import (
    ExperimentError,
    Protocol,
    decide,
    derive_seed,
    group_columns,
    pattern_name,
    presentation_forced,
    resolve_patterns,
)

TRAJECTORY_SYNAPSES_PER_GROUP = 16


@dataclass(frozen=True)
class EpisodeRecord:
    """One learning episode: which unit won and how fast weights railed."""

    presentation: int
    pattern: str
    group: int
    start_step: int
    railed_step: int

    @property
    def convergence_steps(self) -> int:
        return self.railed_step - self.start_step


@dataclass(frozen=True)
class TrainingReport:
    """Outcome of presenting a pattern sequence to a fresh network."""

    presentations: tuple[str, ...]
    episodes: tuple[EpisodeRecord, ...]
    recognized: tuple[int, ...]
    capacity_exhausted: tuple[int, ...]
    weights: np.ndarray
    trajectories: tuple[ProbeRecord, ...]
    not_railed_end: np.ndarray

    @property
    def label_of(self) -> dict[str, int]:
        """Pattern name -> trained group, for the episodes that happened."""
        return {e.pattern: e.group for e in self.episodes}


def _merge_probes(per_run: list[list[ProbeRecord]]) -> tuple[ProbeRecord, ...]:
    merged: dict[tuple[str, int], list[np.ndarray]] = {}
    for records in per_run:
        for rec in records:
            if rec.kind != "weight":
                continue
            merged.setdefault((rec.kind, rec.target), []).append(rec.samples)
    return tuple(
        ProbeRecord(kind=kind, target=target, samples=np.concatenate(chunks))
        for (kind, target), chunks in merged.items()
    )


def run_training(
    built: BuildResult,
    patterns: Sequence[str | SynthPattern],
    protocol: Protocol,
    seed: int,
) -> TrainingReport:
    """Present each pattern once, with motor cover between presentations.

    Raises ExperimentError if more than one allocation unit wins a single
    presentation (the staggered arbitration guarantees uniqueness) or if a
    unit wins two presentations (spent units must stay spent). Capacity
    exhaustion is not an error: the affected presentations are listed in
    the report.
    """
    pats = resolve_patterns(patterns)
    net, handles = built.network, built.handles
    n_groups = len(handles.outputs)
    if len(pats) == 0:
        raise ExperimentError("no patterns to train")

    sim = Simulator(net, seed=seed)
    latch_ids = [unit["latch"] for unit in handles.nsm]
    sim.attach_spike_probe(latch_ids)
    for group_syns in handles.mapping_plastic:
        stride = max(1, group_syns.shape[0] // TRAJECTORY_SYNAPSES_PER_GROUP)
        sim.attach_weight_probe(group_syns[::stride][:TRAJECTORY_SYNAPSES_PER_GROUP])

    wta_cols = group_columns(net, "wta_g")
    episodes: list[EpisodeRecord] = []
    recognized: list[int] = []
    exhausted: list[int] = []
    probe_runs: list[list[ProbeRecord]] = []
    names: list[str] = []
    won: set[int] = set()
    cursor = 0

    for k, pat in enumerate(pats):
        names.append(pattern_name(pat))
        binned = synthesize(pat, protocol.train_duration, seed=derive_seed(seed, k))
        forced = presentation_forced(
            binned,
            handles.input_ids,
            handles.motor,
            cursor,
            protocol.gap_duration,
            protocol.settle_duration,
        )
        result = sim.run(protocol.gap_duration + protocol.train_duration, forced_spikes=forced)
        probe_runs.append(result.probes)
        cursor += result.n_steps

        latch_spikes = {
            rec.target: rec.samples[:, 0]
            for rec in result.probes
            if rec.kind == "spike" and rec.target in latch_ids
        }
        winners = [
            g
            for g in range(n_groups)
            if latch_spikes.get(latch_ids[g], np.empty(0)).shape[0] > 0
        ]
        if len(winners) > 1:
            raise ExperimentError(
                f"presentation {k}: allocation units {winners} won simultaneously"
            )
        if winners:
            g = winners[0]
            if g in won:
                raise ExperimentError(
                    f"presentation {k}: spent allocation unit {g} won again"
                )
            won.add(g)
            start = int(latch_spikes[latch_ids[g]][0])
            rail_col = handles.rail_groups[g]
            zero_rows = np.flatnonzero(result.not_railed[:, rail_col] == 0)
            if zero_rows.shape[0] == 0:
                raise ExperimentError(
                    f"presentation {k}: episode started but weights never railed"
                )
            episodes.append(
                EpisodeRecord(
                    presentation=k,
                    pattern=names[-1],
                    group=g,
                    start_step=start,
                    railed_step=int(result.t_start + zero_rows[0]),
                )
            )
            continue

        window = result.spike_counts[-protocol.decision_window :, wta_cols].sum(axis=0)
        if decide(window, protocol.decision_floor) is not None:
            recognized.append(k)
        else:
            exhausted.append(k)

    return TrainingReport(
        presentations=tuple(names),
        episodes=tuple(episodes),
        recognized=tuple(recognized),
        capacity_exhausted=tuple(exhausted),
        weights=sim.weights_by_syn_id(),
        trajectories=_merge_probes(probe_runs),
        not_railed_end=result.not_railed[-1].copy(),
    )
