"""Evaluation runs: confusion matrices before and after the WTA layer.

Classification is read from the trailing decision window of each
presentation: pre-WTA from per-group output spike counts, post-WTA from
per-group WTA spike counts, both by strict argmax with a minimum-count
floor. Confusion matrices have one extra column for "no decision"; rows
therefore always sum to the number of trials of that true class.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..architecture.builder import BuildResult
from ..engine import CurrentNoise, Simulator
from ..events import SynthPattern, inject_noise, synthesize
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

_NOISE_KEY = 7  # derive_seed site key for injected input noise


@dataclass(frozen=True)
class TrialTally:
    """Spike bookkeeping for one presentation."""

    pattern: str
    label: int | None
    output_window: np.ndarray
    wta_window: np.ndarray
    output_total: np.ndarray
    wta_total: np.ndarray
    novelty_window: int
    decision_pre: int | None
    decision_post: int | None


@dataclass(frozen=True)
class EvalReport:
    """Evaluation outcome over one presentation sequence.

    ``confusion_pre``/``confusion_post`` are (G, G+1) count matrices over
    the labeled presentations; column G is "no decision". Unlabeled
    presentations (novelty probes) appear only in ``tallies``.
    """

    n_groups: int
    group_labels: tuple[str, ...]
    confusion_pre: np.ndarray
    confusion_post: np.ndarray
    accuracy_pre: float
    accuracy: float
    tallies: tuple[TrialTally, ...]
    weight_drift: int
    latency_samples: tuple[int, ...] = ()
    convergence_steps: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        for m in (self.confusion_pre, self.confusion_post):
            if m.shape != (self.n_groups, self.n_groups + 1):
                raise ExperimentError("confusion matrix has wrong shape")
        if not 0.0 <= self.accuracy <= 1.0 or not 0.0 <= self.accuracy_pre <= 1.0:
            raise ExperimentError("accuracy outside [0, 1]")


def _accuracy(confusion: np.ndarray) -> float:
    total = int(confusion.sum())
    if total == 0:
        return 0.0
    return float(np.trace(confusion[:, :-1]) / total)


def run_evaluation(
    built: BuildResult,
    weights: np.ndarray,
    patterns: Sequence[str | SynthPattern],
    protocol: Protocol,
    seed: int,
    labels: Sequence[int | None] | None = None,
    *,
    input_noise_pct: float = 0.0,
    noise: CurrentNoise | None = None,
) -> EvalReport:
    """Present each pattern to a frozen trained network and classify it.

    ``labels`` gives the true group per presentation (None marks a novelty
    probe, kept out of the confusion matrices). The default labels the k-th
    presentation k while k < n_groups and treats the rest as probes, which
    matches evaluating the training sequence plus held-out shapes.
    """
    pats = resolve_patterns(patterns)
    net, handles = built.network, built.handles
    n_groups = len(handles.outputs)
    if labels is None:
        labels = [k if k < n_groups else None for k in range(len(pats))]
    if len(labels) != len(pats):
        raise ExperimentError("labels and patterns differ in length")
    for lab in labels:
        if lab is not None and not 0 <= lab < n_groups:
            raise ExperimentError(f"label {lab} outside the {n_groups} groups")

    sim = Simulator(net, seed=seed, noise=noise)
    sim.load_weights_by_syn_id(weights)
    out_cols = group_columns(net, "outputs_g")
    wta_cols = group_columns(net, "wta_g")
    novelty_col = list(net.group_names).index("novelty_gate")

    confusion_pre = np.zeros((n_groups, n_groups + 1), dtype=np.int64)
    confusion_post = np.zeros((n_groups, n_groups + 1), dtype=np.int64)
    tallies: list[TrialTally] = []
    cursor = 0

    for k, (pat, label) in enumerate(zip(pats, labels)):
        binned = synthesize(pat, protocol.eval_duration, seed=derive_seed(seed, k))
        if input_noise_pct > 0.0:
            binned = inject_noise(binned, input_noise_pct, derive_seed(seed, k, _NOISE_KEY))
        forced = presentation_forced(
            binned,
            handles.input_ids,
            handles.motor,
            cursor,
            protocol.gap_duration,
            protocol.settle_duration,
        )
        result = sim.run(protocol.gap_duration + protocol.eval_duration, forced_spikes=forced)
        cursor += result.n_steps

        window = result.spike_counts[-protocol.decision_window :]
        pattern_on = result.spike_counts[protocol.gap_duration :]
        out_window = window[:, out_cols].sum(axis=0)
        wta_window = window[:, wta_cols].sum(axis=0)
        pre = decide(out_window, protocol.decision_floor)
        post = decide(wta_window, protocol.decision_floor)
        tallies.append(
            TrialTally(
                pattern=pattern_name(pat),
                label=label,
                output_window=out_window,
                wta_window=wta_window,
                output_total=pattern_on[:, out_cols].sum(axis=0),
                wta_total=pattern_on[:, wta_cols].sum(axis=0),
                novelty_window=int(window[:, novelty_col].sum()),
                decision_pre=pre,
                decision_post=post,
            )
        )
        if label is not None:
            confusion_pre[label, n_groups if pre is None else pre] += 1
            confusion_post[label, n_groups if post is None else post] += 1

    drift = int(np.abs(sim.weights_by_syn_id() - np.asarray(weights)).sum())
    return EvalReport(
        n_groups=n_groups,
        group_labels=tuple(f"group{g}" for g in range(n_groups)),
        confusion_pre=confusion_pre,
        confusion_post=confusion_post,
        accuracy_pre=_accuracy(confusion_pre),
        accuracy=_accuracy(confusion_post),
        tallies=tuple(tallies),
        weight_drift=drift,
    )


def sum_confusions(reports: Sequence[EvalReport]) -> tuple[np.ndarray, np.ndarray]:
    """Element-wise sums of (pre, post) confusion matrices across reports."""
    if not reports:
        raise ExperimentError("no reports to aggregate")
    pre = np.zeros_like(reports[0].confusion_pre)
    post = np.zeros_like(reports[0].confusion_post)
    for rep in reports:
        pre += rep.confusion_pre
        post += rep.confusion_post
    return pre, post


def tally_share_matrix(
    reports: Sequence[EvalReport], counts_attr: str, n_groups: int
) -> np.ndarray:
    """Row-normalized spike-share matrix from per-trial tallies.

    Row g holds the mean share of window spikes (``output_window`` or
    ``wta_window``) landing in each group over the labeled trials of true
    class g — the spike-mass analogue of a confusion matrix, which is the
    view in which the WTA layer's sharpening is visible even when both
    decision-level matrices are diagonal.
    """
    sums = np.zeros((n_groups, n_groups), dtype=np.float64)
    trials = np.zeros(n_groups, dtype=np.int64)
    for rep in reports:
        for tally in rep.tallies:
            if tally.label is None:
                continue
            counts = np.asarray(getattr(tally, counts_attr), dtype=np.float64)
            total = counts.sum()
            if total > 0:
                sums[tally.label] += counts / total
            trials[tally.label] += 1
    out = np.zeros_like(sums)
    nonzero = trials > 0
    out[nonzero] = sums[nonzero] / trials[nonzero, None]
    return out
