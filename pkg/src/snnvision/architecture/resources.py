"""Resource accounting: neuron/synapse counts and per-pattern growth."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .builder import build
from .config import PatternNetConfig


@dataclass(frozen=True)
class ResourceReport:
    n_output_groups: int
    n_neurons: int
    n_synapses: int
    n_plastic_mapping: int
    n_plastic_disable: int
    n_fixed: int
    neurons_per_group: int
    synapses_per_group: int
    plastic_mapping_per_group: int
    fixed_per_group: int

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _counts(config: PatternNetConfig) -> tuple[int, int, int, int, int]:
    result = build(config)
    net = result.network
    plastic = net.syn_rule >= 0
    rail = net.syn_rail_group >= 0
    n_plastic_mapping = int(np.count_nonzero(plastic & rail))
    n_plastic_disable = int(np.count_nonzero(plastic & ~rail))
    n_fixed = int(np.count_nonzero(~plastic))
    return net.n_neurons, net.n_synapses, n_plastic_mapping, n_plastic_disable, n_fixed


def count_resources(config: PatternNetConfig) -> ResourceReport:
    """Measure the built network and its marginal cost per added pattern slot.

    The per-group deltas are measured, not predicted: the network is built at
    ``n_output_groups`` and again one group smaller (or larger when already at
    one group), and the difference is reported.
    """
    n_neurons, n_syn, n_map, n_dis, n_fixed = _counts(config)
    if config.n_output_groups > 1:
        other = dataclasses.replace(config, n_output_groups=config.n_output_groups - 1)
        sign = 1
    else:
        other = dataclasses.replace(config, n_output_groups=config.n_output_groups + 1)
        sign = -1
    o_neurons, o_syn, o_map, _, o_fixed = _counts(other)
    return ResourceReport(
        n_output_groups=config.n_output_groups,
        n_neurons=n_neurons,
        n_synapses=n_syn,
        n_plastic_mapping=n_map,
        n_plastic_disable=n_dis,
        n_fixed=n_fixed,
        neurons_per_group=sign * (n_neurons - o_neurons),
        synapses_per_group=sign * (n_syn - o_syn),
        plastic_mapping_per_group=sign * (n_map - o_map),
        fixed_per_group=sign * (n_fixed - o_fixed),
    )


def manifest(config: PatternNetConfig) -> dict:
    """Full structural inventory of the built network, JSON-serializable."""
    result = build(config)
    net = result.network
    report = count_resources(config)
    populations = {name: int(ids.shape[0]) for name, ids in net.populations.items()}
    return {
        "populations": populations,
        "n_tuples": config.n_tuples,
        "scale_groups": [list(p) for p in config.scale_groups],
        "resources": report.to_dict(),
        "max_delay": net.max_delay,
    }
