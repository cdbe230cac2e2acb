"""Scalability report: resource growth as output groups are added."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..architecture import build
from ..architecture.config import PatternNetConfig
from ..architecture.resources import manifest
from .protocol import ExperimentError


@dataclass(frozen=True)
class ScalabilityRow:
    n_groups: int
    neurons: int
    synapses: int
    plastic: int
    delta_neurons: int | None
    delta_synapses: int | None
    delta_plastic: int | None


@dataclass(frozen=True)
class ScalabilityReport:
    rows: tuple[ScalabilityRow, ...]
    delta_neurons: int
    delta_synapses: int
    delta_plastic: int

    def csv_rows(self) -> list[list]:
        return [
            [
                r.n_groups,
                r.neurons,
                r.synapses,
                r.plastic,
                "" if r.delta_neurons is None else r.delta_neurons,
                "" if r.delta_synapses is None else r.delta_synapses,
                "" if r.delta_plastic is None else r.delta_plastic,
            ]
            for r in self.rows
        ]

    @staticmethod
    def csv_header() -> list[str]:
        return [
            "n_groups",
            "neurons",
            "synapses",
            "plastic_synapses",
            "delta_neurons",
            "delta_synapses",
            "delta_plastic",
        ]


def report_scalability(config: PatternNetConfig, n_max: int = 8) -> ScalabilityReport:
    """Build the network at each group count and difference the resources.

    Raises ExperimentError unless the per-group deltas are constant across
    n = 1..n_max (the architecture grows linearly by construction; any
    deviation means the builder wired something cross-group).
    """
    if n_max < 2:
        raise ExperimentError("n_max must be >= 2 to measure deltas")
    rows: list[ScalabilityRow] = []
    prev: ScalabilityRow | None = None
    for n in range(1, n_max + 1):
        net = build(replace(config, n_output_groups=n)).network
        neurons = net.n_neurons
        synapses = net.n_synapses
        plastic = int((net.syn_rule >= 0).sum())
        rows.append(
            ScalabilityRow(
                n_groups=n,
                neurons=neurons,
                synapses=synapses,
                plastic=plastic,
                delta_neurons=None if prev is None else neurons - prev.neurons,
                delta_synapses=None if prev is None else synapses - prev.synapses,
                delta_plastic=None if prev is None else plastic - prev.plastic,
            )
        )
        prev = rows[-1]

    deltas = {
        (r.delta_neurons, r.delta_synapses, r.delta_plastic) for r in rows[1:]
    }
    if len(deltas) != 1:
        raise ExperimentError(f"per-group deltas are not constant: {sorted(deltas)}")

    base = manifest(replace(config, n_output_groups=1))["resources"]
    if base["n_neurons"] != rows[0].neurons or base["n_synapses"] != rows[0].synapses:
        raise ExperimentError("n=1 counts disagree with the architecture manifest")

    (d_neurons, d_synapses, d_plastic) = next(iter(deltas))
    return ScalabilityReport(
        rows=tuple(rows),
        delta_neurons=int(d_neurons),
        delta_synapses=int(d_synapses),
        delta_plastic=int(d_plastic),
    )
