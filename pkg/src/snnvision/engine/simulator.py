"""Simulator facade around the compiled kernel.

Owns mutable run state (compartments, delivery ring, traces, weights, RNG)
so a run can be split across multiple ``run`` calls without changing any
result: state persists between calls and the step counter keeps advancing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernel import run_steps
from .network import NetworkSpec
from .types import CompartmentState, ProbeRecord, SpikeGenerator, StructuralError


@dataclass(frozen=True)
class CurrentNoise:
    """Uniform integer current injected into every listed neuron each step.

    Each step, every target neuron independently receives an additive input
    current drawn uniformly from ``[low, high]`` (inclusive). Draw order is
    fixed (by target list order), so a given seed always yields the same run.
    """

    neuron_ids: tuple[int, ...]
    low: int
    high: int

    def __post_init__(self) -> None:
        if self.high < self.low:
            raise StructuralError("noise range is empty")


@dataclass
class RunResult:
    """Outputs of one ``run`` call.

    ``spike_counts`` has one row per step and one column per count group.
    ``not_railed`` has one row per step and one column per rail group with
    the end-of-step number of plastic weights strictly inside their rails.
    """

    t_start: int
    n_steps: int
    group_names: tuple[str, ...]
    spike_counts: np.ndarray
    rail_group_names: tuple[str, ...]
    not_railed: np.ndarray
    probes: list[ProbeRecord] = field(default_factory=list)

    def group_counts(self, name: str) -> np.ndarray:
        return self.spike_counts[:, self.group_names.index(name)]


def _pack_schedule(
    t0: int, n_steps: int, spikes_by_step: dict[int, list[int]] | None
) -> tuple[np.ndarray, np.ndarray]:
    """CSR over local step index -> forced neuron ids."""
    indptr = np.zeros(n_steps + 1, dtype=np.int64)
    if not spikes_by_step:
        return indptr, np.zeros(0, dtype=np.int64)
    ids: list[int] = []
    for local in range(n_steps):
        chunk = spikes_by_step.get(t0 + local)
        if chunk:
            ids.extend(sorted(chunk))
        indptr[local + 1] = len(ids)
    return indptr, np.asarray(ids, dtype=np.int64)


class Simulator:
    """Stateful fixed-timestep run of one built network."""

    def __init__(
        self,
        network: NetworkSpec,
        seed: int = 0,
        noise: CurrentNoise | None = None,
    ) -> None:
        self.network = network
        n = network.n_neurons
        self._t = 0
        # u and v are saturation-clamped to +/-(2**31 - 1), so int32 holds
        # them exactly; the kernel widens to int64 before any product
        self._u = np.zeros(n, dtype=np.int32)
        self._v = np.zeros(n, dtype=np.int32)
        self._refrac = np.zeros(n, dtype=np.int32)
        self._traces = np.zeros(n, dtype=np.int64)
        self._weights = network.syn_weight0.copy()
        ring = network.max_delay + 2
        # int32 keeps the ring inside L2; build() bounds one-step inbound
        # totals at 2**30 so the accumulation cannot wrap
        self._pending = np.zeros((ring, n), dtype=np.int32)
        self._ring_base = np.zeros(1, dtype=np.int64)
        self._sat_count = np.zeros(1, dtype=np.int64)
        self._rng_state = np.array([np.uint64(seed) ^ np.uint64(0xD1B54A32D192ED03)],
                                   dtype=np.uint64)
        self._nr_counts = self._initial_not_railed()
        if noise is not None:
            bad = [i for i in noise.neuron_ids if not 0 <= i < n]
            if bad:
                raise StructuralError(f"noise targets unknown neurons {bad}")
            self._noise_ids = np.asarray(noise.neuron_ids, dtype=np.int64)
            self._noise_lo = int(noise.low)
            self._noise_span = int(noise.high - noise.low + 1)
        else:
            self._noise_ids = np.zeros(0, dtype=np.int64)
            self._noise_lo = 0
            self._noise_span = 0
        self._spike_probe = np.zeros(n, dtype=np.int64)
        self._voltage_probe: list[int] = []
        self._weight_probe: list[int] = []

    # -- probes ------------------------------------------------------------

    def attach_spike_probe(self, neuron_ids) -> None:
        for i in neuron_ids:
            self._spike_probe[i] = 1

    def attach_voltage_probe(self, neuron_ids) -> None:
        self._voltage_probe.extend(int(i) for i in neuron_ids)

    def attach_weight_probe(self, syn_ids) -> None:
        self._weight_probe.extend(int(s) for s in syn_ids)

    # -- state access ------------------------------------------------------

    @property
    def now(self) -> int:
        return self._t

    @property
    def saturation_events(self) -> int:
        return int(self._sat_count[0])

    def state_of(self, neuron_id: int) -> CompartmentState:
        return CompartmentState(
            u=int(self._u[neuron_id]),
            v=int(self._v[neuron_id]),
            refractory_remaining=int(self._refrac[neuron_id]),
        )

    def weight_of(self, syn_id: int) -> int:
        return int(self._weights[self.network.csr_of_syn[syn_id]])

    def weights_by_syn_id(self) -> np.ndarray:
        return self._weights[self.network.csr_of_syn].copy()

    def load_weights_by_syn_id(self, weights) -> None:
        w = np.asarray(weights, dtype=np.int64)
        if w.shape != (self.network.n_synapses,):
            raise StructuralError("weight vector has wrong length")
        if w.size and np.abs(w).max() >= 2**31:
            raise StructuralError("weight outside 32-bit range")
        self._weights[self.network.csr_of_syn] = w
        self._nr_counts = self._initial_not_railed()

    def _initial_not_railed(self) -> np.ndarray:
        net = self.network
        counts = np.zeros(max(1, len(net.rail_group_names)), dtype=np.int64)
        if hasattr(self, "_weights"):
            weights = self._weights
        else:
            weights = net.syn_weight0
        for k in range(net.syn_rule.shape[0]):
            g = net.syn_rail_group[k]
            if g < 0:
                continue
            r = net.syn_rule[k]
            w = weights[k]
            if w != net.rule_wmax[r] and w != net.rule_wmin[r]:
                counts[g] += 1
        return counts

    # -- running -----------------------------------------------------------

    def run(
        self,
        n_steps: int,
        forced_spikes: dict[int, list[int]] | None = None,
        generators: list[SpikeGenerator] | None = None,
        record_probes: bool = True,
    ) -> RunResult:
        """Advance ``n_steps`` steps.

        ``forced_spikes`` maps absolute step index -> neuron ids that spike
        unconditionally at that step (only input-marked neurons are allowed).
        ``generators`` contribute their in-window scheduled spikes the same
        way.
        """
        net = self.network
        if n_steps < 0:
            raise StructuralError("n_steps must be >= 0")
        if generators:
            forced_spikes = {
                t: list(ids) for t, ids in (forced_spikes or {}).items()
            }
            for gen in generators:
                lo = np.searchsorted(gen.schedule, self._t, side="left")
                hi = np.searchsorted(gen.schedule, self._t + n_steps, side="left")
                for t in gen.schedule[lo:hi]:
                    forced_spikes.setdefault(int(t), []).append(gen.neuron_id)
        if forced_spikes:
            for t, ids in forced_spikes.items():
                if t < self._t or t >= self._t + n_steps:
                    raise StructuralError(
                        f"forced spike at step {t} outside run window "
                        f"[{self._t}, {self._t + n_steps})"
                    )
                for i in ids:
                    if not net.is_input[i]:
                        raise StructuralError(
                            f"neuron {i} is not an input neuron"
                        )
        ext_indptr, ext_ids = _pack_schedule(self._t, n_steps, forced_spikes)

        n_groups = max(1, len(net.group_names))
        counts_out = np.zeros((n_steps, n_groups), dtype=np.int64)
        n_rail = max(1, len(net.rail_group_names))
        nr_out = np.zeros((n_steps, n_rail), dtype=np.int64)

        if record_probes:
            n_probed = int(self._spike_probe.sum())
            sp_cap = n_steps * max(1, n_probed) if n_probed else 1
            vp_ids = np.asarray(self._voltage_probe, dtype=np.int64)
            wp_csr = net.csr_of_syn[
                np.asarray(self._weight_probe, dtype=np.int64)
            ] if self._weight_probe else np.zeros(0, dtype=np.int64)
            sp_mask = self._spike_probe
        else:
            sp_cap = 1
            vp_ids = np.zeros(0, dtype=np.int64)
            wp_csr = np.zeros(0, dtype=np.int64)
            sp_mask = np.zeros(net.n_neurons, dtype=np.int64)
        sp_t = np.zeros(sp_cap, dtype=np.int64)
        sp_id = np.zeros(sp_cap, dtype=np.int64)
        sp_cursor = np.zeros(1, dtype=np.int64)
        vp_out = np.zeros((n_steps, vp_ids.shape[0]), dtype=np.int64)
        wp_out = np.zeros((n_steps, wp_csr.shape[0]), dtype=np.int64)
        spiked_buf = np.zeros(net.n_neurons, dtype=np.int64)
        spiked_flag = np.zeros(net.n_neurons, dtype=np.int64)

        run_steps(
            n_steps,
            self._t,
            net.threshold,
            net.bias,
            net.cur_retain,
            net.vol_retain,
            net.refractory,
            net.syn_indptr,
            net.syn_post,
            net.syn_delay,
            net.syn_rule,
            net.syn_pre,
            net.syn_rail_group,
            net.pp_indptr,
            net.pp_syn,
            net.rule_kind,
            net.rule_alpha,
            net.rule_rate,
            net.rule_fatigue,
            net.rule_wmax,
            net.rule_wmin,
            net.trace_retain,
            net.trace_impulse,
            net.trace_ids,
            net.count_group,
            self._weights,
            self._u,
            self._v,
            self._refrac,
            self._traces,
            self._pending,
            self._ring_base,
            self._nr_counts,
            self._sat_count,
            self._rng_state,
            ext_indptr,
            ext_ids,
            self._noise_ids,
            self._noise_lo,
            self._noise_span,
            counts_out,
            nr_out,
            sp_mask,
            sp_t,
            sp_id,
            sp_cursor,
            vp_ids,
            vp_out,
            wp_csr,
            wp_out,
            spiked_buf,
            spiked_flag,
        )

        probes: list[ProbeRecord] = []
        if record_probes:
            n_sp = int(sp_cursor[0])
            probed = np.flatnonzero(self._spike_probe)
            for i in probed:
                mine = sp_t[:n_sp][sp_id[:n_sp] == i]
                samples = np.stack(
                    [mine, np.ones_like(mine)], axis=1
                ) if mine.size else np.empty((0, 2), dtype=np.int64)
                probes.append(ProbeRecord(kind="spike", target=int(i), samples=samples))
            steps_axis = np.arange(self._t, self._t + n_steps, dtype=np.int64)
            for col, i in enumerate(vp_ids):
                samples = np.stack([steps_axis, vp_out[:, col]], axis=1)
                probes.append(ProbeRecord(kind="voltage", target=int(i), samples=samples))
            for col, s in enumerate(self._weight_probe):
                samples = np.stack([steps_axis, wp_out[:, col]], axis=1)
                probes.append(ProbeRecord(kind="weight", target=int(s), samples=samples))

        result = RunResult(
            t_start=self._t,
            n_steps=n_steps,
            group_names=net.group_names,
            spike_counts=counts_out,
            rail_group_names=net.rail_group_names,
            not_railed=nr_out,
            probes=probes,
        )
        self._t += n_steps
        return result


def run(
    network: NetworkSpec,
    n_steps: int,
    forced_spikes: dict[int, list[int]] | None = None,
    seed: int = 0,
    noise: CurrentNoise | None = None,
) -> RunResult:
    """One-shot convenience wrapper: fresh simulator, single run."""
    sim = Simulator(network, seed=seed, noise=noise)
    return sim.run(n_steps, forced_spikes)
