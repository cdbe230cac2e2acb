"""Robustness sweeps: injected input noise and neuron-parameter noise.

Both sweeps evaluate a frozen trained weight vector over a (level, seed)
grid and report accuracy per level with per-seed resolution. Training is
not repeated inside a sweep: robustness here means a stored pattern meeting
a degraded input stream or a perturbed substrate at recognition time.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..architecture import build
from ..architecture.builder import FEATURES, BuildResult
from ..engine import CurrentNoise
from ..events import SynthPattern
from .evaluation import EvalReport, run_evaluation
from .protocol import ExperimentError, Protocol, derive_seed

INPUT_NOISE_LEVELS = tuple(float(10 * i) for i in range(14))  # 0..130%
NEURON_NOISE_LEVELS = (0.0, 5.0, 10.0, 20.0, 35.0, 50.0)

_JITTER_KEY = 11  # derive_seed site key for parameter jitter draws


@dataclass(frozen=True)
class SweepPoint:
    level: float
    accuracies: tuple[float, ...]

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def lo(self) -> float:
        return float(min(self.accuracies))

    @property
    def hi(self) -> float:
        return float(max(self.accuracies))


@dataclass(frozen=True)
class SweepResult:
    """Accuracy curve over noise levels, with per-seed values per level."""

    kind: str
    levels: tuple[float, ...]
    seeds: tuple[int, ...]
    points: tuple[SweepPoint, ...]
    reports: tuple[tuple[EvalReport, ...], ...]

    @property
    def baseline(self) -> float:
        """Mean accuracy at the lowest swept level (level 0 by default)."""
        low = int(np.argmin(self.levels))
        return self.points[low].mean

    def point_at(self, level: float) -> SweepPoint:
        for point in self.points:
            if point.level == level:
                return point
        raise ExperimentError(f"level {level} not in sweep {self.levels}")

    def csv_rows(self) -> list[list]:
        rows = []
        for point in self.points:
            rows.append([point.level, point.mean, point.lo, point.hi, *point.accuracies])
        return rows

    def csv_header(self) -> list[str]:
        return ["level_pct", "accuracy_mean", "accuracy_min", "accuracy_max"] + [
            f"seed_{s}" for s in self.seeds
        ]


def sweep_input_noise(
    built: BuildResult,
    weights: np.ndarray,
    patterns: Sequence[str | SynthPattern],
    protocol: Protocol,
    labels: Sequence[int | None] | None = None,
    levels: Sequence[float] = INPUT_NOISE_LEVELS,
    seeds: Sequence[int] | None = None,
) -> SweepResult:
    """Accuracy vs. extra input events (percent of the signal event count).

    Level L adds floor(L% of signal spikes) uniformly random events on free
    (timestep, pixel) slots before each evaluation. Per-seed pattern
    realizations are identical across levels, so the level axis is a paired
    comparison, and level 0 is bit-identical to a plain evaluation.
    """
    seeds = tuple(protocol.seeds if seeds is None else seeds)
    level_points: list[SweepPoint] = []
    level_reports: list[tuple[EvalReport, ...]] = []
    for level in levels:
        if level < 0:
            raise ExperimentError("noise level must be >= 0")
        reports = [
            run_evaluation(
                built,
                weights,
                patterns,
                protocol,
                seed,
                labels,
                input_noise_pct=float(level),
            )
            for seed in seeds
        ]
        level_points.append(
            SweepPoint(float(level), tuple(rep.accuracy for rep in reports))
        )
        level_reports.append(tuple(reports))
    return SweepResult(
        kind="input-noise",
        levels=tuple(float(v) for v in levels),
        seeds=seeds,
        points=tuple(level_points),
        reports=tuple(level_reports),
    )


def jittered_build(config, level_pct: float, seed: int) -> tuple[BuildResult, CurrentNoise | None]:
    """Rebuild the network with feature parameters jittered at level_pct.

    Per neuron, thresholds and biases are scaled by (1 + e) with e drawn
    once, uniformly in +/-level%; additionally each feature neuron receives
    a per-step uniform current kick of amplitude level% of the feature
    threshold (the neuron's natural current scale). Level 0 returns the
    unmodified build and no current noise.
    """
    if level_pct < 0:
        raise ExperimentError("noise level must be >= 0")
    if level_pct == 0:
        return build(config), None
    rng = np.random.default_rng(derive_seed(seed, int(round(level_pct * 100)), _JITTER_KEY))
    side2 = 2 * config.input_side * config.input_side
    frac = level_pct / 100.0
    th = np.round(config.feature_threshold * (1.0 + rng.uniform(-frac, frac, side2)))
    th = np.maximum(1, th).astype(np.int64)
    bi = np.round(config.feature_bias * (1.0 + rng.uniform(-frac, frac, side2))).astype(np.int64)
    jittered = build(config, feature_thresholds=th, feature_biases=bi)
    feature_ids = np.concatenate([jittered.handles.features[f] for f in FEATURES])
    amplitude = int(round(level_pct * config.feature_threshold / 100.0))
    noise = None
    if amplitude > 0:
        noise = CurrentNoise(
            neuron_ids=tuple(int(i) for i in feature_ids),
            low=-amplitude,
            high=amplitude,
        )
    return jittered, noise


def sweep_neuron_noise(
    built: BuildResult,
    weights: np.ndarray,
    patterns: Sequence[str | SynthPattern],
    protocol: Protocol,
    labels: Sequence[int | None] | None = None,
    levels: Sequence[float] = NEURON_NOISE_LEVELS,
    seeds: Sequence[int] | None = None,
) -> SweepResult:
    """Accuracy vs. multiplicative feature-parameter jitter plus current noise.

    The jittered network shares the clean network's topology and synapse
    ids, so the trained weight vector loads unchanged; only the feature
    layer's operating points move.
    """
    seeds = tuple(protocol.seeds if seeds is None else seeds)
    level_points: list[SweepPoint] = []
    level_reports: list[tuple[EvalReport, ...]] = []
    for level in levels:
        reports = []
        for seed in seeds:
            jittered, noise = jittered_build(built.config, float(level), seed)
            reports.append(
                run_evaluation(
                    jittered, weights, patterns, protocol, seed, labels, noise=noise
                )
            )
        level_points.append(
            SweepPoint(float(level), tuple(rep.accuracy for rep in reports))
        )
        level_reports.append(tuple(reports))
    return SweepResult(
        kind="neuron-noise",
        levels=tuple(float(v) for v in levels),
        seeds=seeds,
        points=tuple(level_points),
        reports=tuple(level_reports),
    )
