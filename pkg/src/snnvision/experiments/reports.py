"""Report serialization: CSV curves/matrices and a JSON scalar summary.

Report files are named ``<experiment>_<timestamp>_<seedset-hash>.<ext>``.
The seed-set hash pins the exact trial set; the timestamp separates runs.
File contents never include wall-clock values, so two runs with the same
config and seeds produce byte-identical payloads.
"""

from __future__ import annotations

import csv
import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


def seedset_hash(seeds: Sequence[int]) -> str:
    """8-hex digest of the (sorted) seed set."""
    payload = json.dumps(sorted(int(s) for s in seeds)).encode()
    return hashlib.sha256(payload).hexdigest()[:8]


def report_basename(experiment: str, seeds: Sequence[int], when: datetime | None = None) -> str:
    when = when or datetime.now(timezone.utc)
    stamp = when.strftime("%Y%m%dT%H%M%SZ")
    return f"{experiment}_{stamp}_{seedset_hash(seeds)}"


def write_csv(path: Path | str, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow(list(row))
    return path


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def write_json(path: Path | str, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def confusion_csv_rows(matrix: np.ndarray, group_labels: Sequence[str]) -> list[list]:
    """Rows for a (G, G+1) confusion matrix; last column is no-decision."""
    rows = []
    for g, label in enumerate(group_labels):
        rows.append([label, *[int(v) for v in matrix[g]]])
    return rows


def confusion_csv_header(group_labels: Sequence[str]) -> list[str]:
    return ["true\\decided", *group_labels, "no_decision"]


def trajectory_csv_rows(
    trajectories, step_stride: int = 10
) -> tuple[list[str], list[list]]:
    """Wide table of probed weights: one row per sampled step, one column
    per synapse. Probes sample every step; the stride thins rows for
    plotting."""
    if not trajectories:
        return ["step"], []
    targets = sorted(rec.target for rec in trajectories)
    by_target = {rec.target: rec.samples for rec in trajectories}
    steps = by_target[targets[0]][:, 0]
    keep = np.arange(0, steps.shape[0], step_stride)
    header = ["step"] + [f"syn_{t}" for t in targets]
    rows = []
    for idx in keep:
        rows.append(
            [int(steps[idx])] + [int(by_target[t][idx, 1]) for t in targets]
        )
    return header, rows
