"""Experiment harness: protocols, training/evaluation, sweeps, latency,
scalability, and report serialization."""

from .evaluation import (
    EvalReport,
    TrialTally,
    run_evaluation,
    sum_confusions,
    tally_share_matrix,
)
from .latency import LatencyReport, SwitchSample, measure_latencies, switch_latency
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
from .reports import (
    confusion_csv_header,
    confusion_csv_rows,
    report_basename,
    seedset_hash,
    trajectory_csv_rows,
    write_csv,
    write_json,
)
from .scalability import ScalabilityReport, ScalabilityRow, report_scalability
from .sweeps import (
    INPUT_NOISE_LEVELS,
    NEURON_NOISE_LEVELS,
    SweepPoint,
    SweepResult,
    jittered_build,
    sweep_input_noise,
    sweep_neuron_noise,
)
from .training import EpisodeRecord, TrainingReport, run_training

__all__ = [
    "EpisodeRecord",
    "EvalReport",
    "ExperimentError",
    "INPUT_NOISE_LEVELS",
    "LatencyReport",
    "NEURON_NOISE_LEVELS",
    "Protocol",
    "ScalabilityReport",
    "ScalabilityRow",
    "SweepPoint",
    "SweepResult",
    "SwitchSample",
    "TrainingReport",
    "TrialTally",
    "confusion_csv_header",
    "confusion_csv_rows",
    "decide",
    "derive_seed",
    "group_columns",
    "jittered_build",
    "measure_latencies",
    "pattern_name",
    "presentation_forced",
    "report_basename",
    "report_scalability",
    "resolve_patterns",
    "run_evaluation",
    "run_training",
    "seedset_hash",
    "sum_confusions",
    "sweep_input_noise",
    "sweep_neuron_noise",
    "switch_latency",
    "tally_share_matrix",
    "trajectory_csv_rows",
    "write_csv",
    "write_json",
]
