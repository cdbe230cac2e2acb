"""Engine behaviour: frozen single-neuron cases, then randomized
cross-checks against the independent brute-force stepper."""

from __future__ import annotations

import math
import random

import numpy as np
import pytest

from snnvision.engine import (
    CompartmentParams,
    CurrentNoise,
    NetworkBuilder,
    SAT_MAX,
    Simulator,
    SpikeGenerator,
    StructuralError,
)
from snnvision.plasticity import NsmRule, PatternRule, TraceConfig

from oracles.naive_stepper import NaiveStepper


def _single(params: CompartmentParams) -> Simulator:
    b = NetworkBuilder()
    b.add_neuron("n", params)
    return Simulator(b.build())


def _spike_steps(sim: Simulator, n_steps: int, **kw) -> list[int]:
    sim.attach_spike_probe([0] if not kw.pop("probe", None) else kw["probe"])
    res = sim.run(n_steps, **kw)
    rec = [p for p in res.probes if p.kind == "spike"][0]
    return [int(t) for t in rec.samples[:, 0]]


class TestSingleNeuron:
    def test_pure_integrator_first_spike_at_threshold_over_bias(self):
        # no leak on the voltage, full decay on the current: v grows by the
        # bias each step, first spike once v >= threshold
        theta, bias = 1000, 30
        sim = _single(
            CompartmentParams(
                threshold=theta,
                bias=bias,
                current_decay=1.0,
                voltage_decay=0.0,
            )
        )
        spikes = _spike_steps(sim, 200)
        expected_first = math.ceil(theta / bias) - 1  # v(t) = bias*(t+1)
        assert spikes[0] == expected_first
        # after the reset the cycle repeats exactly
        assert spikes[1] - spikes[0] == expected_first + 1

    def test_memoryless_unit_requires_full_drive_every_step(self):
        # both decays 1.0: only same-step arrivals + bias can cross threshold
        sim = _single(
            CompartmentParams(threshold=100, bias=60, current_decay=1.0, voltage_decay=1.0)
        )
        assert _spike_steps(sim, 50) == []

    def test_bias_only_tonic_firing(self):
        sim = _single(
            CompartmentParams(threshold=50, bias=50, current_decay=1.0, voltage_decay=1.0)
        )
        assert _spike_steps(sim, 5) == [0, 1, 2, 3, 4]

    def test_refractory_spacing(self):
        period = 3
        sim = _single(
            CompartmentParams(
                threshold=50,
                bias=50,
                current_decay=1.0,
                voltage_decay=1.0,
                refractory_period=period,
            )
        )
        spikes = _spike_steps(sim, 40)
        assert spikes[0] == 0
        assert all(b - a == period + 1 for a, b in zip(spikes, spikes[1:]))

    def test_saturation_is_counted_and_clamped(self):
        sim = _single(
            CompartmentParams(
                threshold=SAT_MAX,  # unreachable: v clamps below via u
                bias=2**30,
                current_decay=0.0,  # u accumulates bias forever
                voltage_decay=1.0,
            )
        )
        sim.run(10)
        assert sim.saturation_events > 0
        assert sim.state_of(0).u == SAT_MAX

    def test_voltage_probe_tracks_decay(self):
        # single kick of current, then watch v leak at 50%/step
        b = NetworkBuilder()
        b.add_neuron("in", CompartmentParams(threshold=1), is_input=True)
        b.add_neuron("n", CompartmentParams(threshold=10**9, voltage_decay=0.5))
        b.connect(0, 1, weight=4096)
        sim = Simulator(b.build())
        sim.attach_voltage_probe([1])
        res = sim.run(8, forced_spikes={0: [0]})
        v = {int(t): int(x) for t, x in res.probes[0].samples}
        assert v[1] == 4096
        assert v[2] == 2048
        assert v[3] == 1024


class TestPropagation:
    def test_delivery_arrives_after_one_step_plus_delay(self):
        for delay in (0, 1, 5):
            b = NetworkBuilder()
            b.add_neuron("in", CompartmentParams(threshold=1), is_input=True)
            b.add_neuron("out", CompartmentParams(threshold=10))
            b.connect(0, 1, weight=10, delay=delay)
            sim = Simulator(b.build())
            sim.attach_spike_probe([1])
            res = sim.run(20, forced_spikes={3: [0]})
            rec = res.probes[0]
            assert list(rec.samples[:, 0]) == [3 + 1 + delay]

    def test_spike_generator_equivalent_to_forced_dict(self):
        def build():
            b = NetworkBuilder()
            b.add_neuron("in", CompartmentParams(threshold=1), is_input=True)
            b.add_neuron("out", CompartmentParams(threshold=10))
            b.connect(0, 1, weight=10)
            return b.build()

        sched = [2, 5, 11]
        s1 = Simulator(build())
        s1.attach_spike_probe([1])
        r1 = s1.run(20, forced_spikes={t: [0] for t in sched})
        s2 = Simulator(build())
        s2.attach_spike_probe([1])
        r2 = s2.run(20, generators=[SpikeGenerator(0, np.array(sched))])
        assert np.array_equal(r1.probes[0].samples, r2.probes[0].samples)

    def test_forcing_a_non_input_neuron_is_rejected(self):
        b = NetworkBuilder()
        b.add_neuron("n", CompartmentParams(threshold=10))
        sim = Simulator(b.build())
        with pytest.raises(StructuralError):
            sim.run(5, forced_spikes={0: [0]})

    def test_split_runs_match_single_run(self):
        b = NetworkBuilder()
        ids = b.add_population("p", 3, CompartmentParams(threshold=40, voltage_decay=0.25))
        b.add_neuron("in", CompartmentParams(threshold=1), is_input=True)
        b.connect(3, ids, weight=[30, 25, 20], delay=[0, 1, 2])
        b.connect(0, 1, weight=15)
        b.connect(1, 2, weight=15)
        forced = {t: [3] for t in range(0, 60, 7)}

        s_one = Simulator(b.build())
        r_one = s_one.run(60, forced_spikes=forced)

        s_two = Simulator(b.build())
        r_a = s_two.run(23, forced_spikes={t: v for t, v in forced.items() if t < 23})
        r_b = s_two.run(37, forced_spikes={t: v for t, v in forced.items() if t >= 23})
        merged = np.vstack([r_a.spike_counts, r_b.spike_counts])
        assert np.array_equal(r_one.spike_counts, merged)

    def test_same_seed_bit_identical_noise_runs(self):
        def make():
            b = NetworkBuilder()
            b.add_population("p", 5, CompartmentParams(threshold=300, voltage_decay=0.5))
            return b.build()

        noise = CurrentNoise(neuron_ids=(0, 1, 2, 3, 4), low=-40, high=40)
        runs = []
        for _ in range(2):
            sim = Simulator(make(), seed=1234, noise=noise)
            sim.attach_voltage_probe([0, 1, 2, 3, 4])
            res = sim.run(300)
            runs.append(np.stack([p.samples for p in res.probes]))
        assert np.array_equal(runs[0], runs[1])

        other = Simulator(make(), seed=1235, noise=noise)
        other.attach_voltage_probe([0, 1, 2, 3, 4])
        res3 = other.run(300)
        assert not np.array_equal(runs[0], np.stack([p.samples for p in res3.probes]))


class TestPlasticityInEngine:
    def test_weight_probe_matches_scalar_replay(self):
        # one plastic synapse driven by a regular presynaptic train; engine
        # weights must replay the scalar-rule trajectory exactly
        from snnvision.plasticity import (
            PlasticSynapse,
            apply_on_post_spike,
            tick_trace,
        )

        rule = PatternRule(alpha=0.5, rate=2**-8, w_max=64, w_min=-64)
        trace = TraceConfig(impulse=0.05, decay_tau=20.0)
        b = NetworkBuilder()
        b.add_neuron("pre", CompartmentParams(threshold=1), is_input=True)
        # post spikes only when forced: the synapse's own drive never reaches
        # this threshold, so the scalar replay below sees every update
        b.add_neuron("post", CompartmentParams(threshold=10**9), is_input=True)
        rid = b.add_rule(rule, trace)
        syn = b.connect_plastic(0, 1, rid, weight=10)
        sim = Simulator(b.build())
        sim.attach_weight_probe(syn)

        pre_steps = set(range(0, 400, 3))
        post_steps = set(range(1, 400, 5))
        forced: dict[int, list[int]] = {}
        for t in pre_steps:
            forced.setdefault(t, []).append(0)
        for t in post_steps:
            forced.setdefault(t, []).append(1)
        res = sim.run(400, forced_spikes=forced)

        ref = PlasticSynapse(weight=10, trace=0, rule=rule, trace_cfg=trace)
        expected = []
        for t in range(400):
            ref = tick_trace(ref, t in pre_steps)
            if t in post_steps:
                ref = apply_on_post_spike(ref)
            expected.append(ref.weight)
        got = [int(x) for x in res.probes[0].samples[:, 1]]
        assert got == expected

    def test_not_railed_counter_tracks_transitions(self):
        rule = PatternRule(alpha=0.5, rate=2**-4, w_max=8, w_min=-8)
        trace = TraceConfig(impulse=1.0, decay_tau=1.0)
        b = NetworkBuilder()
        b.add_neuron("pre", CompartmentParams(threshold=1), is_input=True)
        b.add_neuron("post", CompartmentParams(threshold=1), is_input=True)
        rid = b.add_rule(rule, trace)
        g = b.add_rail_group("g")
        b.connect_plastic(0, 1, rid, weight=0, rail_group=g)
        sim = Simulator(b.build())
        forced = {t: [0, 1] for t in range(0, 30)}
        res = sim.run(30, forced_spikes=forced)
        nr = res.not_railed[:, 0]
        assert nr[0] == 1  # still inside the rails after the first update
        assert nr[-1] == 0  # driven onto the upper rail eventually
        assert sim.weight_of(0) == 8


def _random_desc(rng: random.Random) -> dict:
    n = rng.randint(2, 12)
    neurons = []
    for _ in range(n):
        neurons.append(
            {
                "threshold": rng.randint(1, 60),
                "bias": rng.choice([0, 0, 0, rng.randint(-5, 25)]),
                "current_decay": rng.choice([0.0, 0.25, 0.5, 1.0]),
                "voltage_decay": rng.choice([0.0, 0.25, 0.5, 1.0]),
                "refractory": rng.choice([0, 0, 1, 3]),
            }
        )
    rules = [
        {"kind": "pattern", "alpha": 0.5, "rate": 2**-4, "w_max": 40, "w_min": -40},
        {"kind": "nsm", "alpha": 0.25, "rate": 2**-3, "fatigue": 0.5, "w_max": 40},
    ]
    synapses = []
    n_syn = rng.randint(1, 4 * n)
    plastic_pre: set[int] = set()
    for _ in range(n_syn):
        pre = rng.randrange(n)
        post = rng.randrange(n)
        syn = {
            "pre": pre,
            "post": post,
            "weight": rng.randint(-30, 60),
            "delay": rng.choice([0, 0, 1, 2, 6]),
        }
        if rng.random() < 0.35:
            syn["rule"] = rng.choice(rules)
            syn["weight"] = rng.randint(-20, 40)
            plastic_pre.add(pre)
        synapses.append(syn)
    for i in plastic_pre:
        neurons[i]["trace_impulse"] = 0.5
        neurons[i]["trace_tau"] = 4.0
    return {"neurons": neurons, "synapses": synapses}


def _build_from_desc(desc: dict):
    b = NetworkBuilder()
    for i, p in enumerate(desc["neurons"]):
        b.add_neuron(
            f"n{i}",
            CompartmentParams(
                threshold=p["threshold"],
                bias=p["bias"],
                current_decay=p["current_decay"],
                voltage_decay=p["voltage_decay"],
                refractory_period=p["refractory"],
            ),
            is_input=True,
        )
    trace = TraceConfig(impulse=0.5, decay_tau=4.0)
    rule_ids: dict[str, int] = {}
    syn_ids = []
    for s in desc["synapses"]:
        r = s.get("rule")
        if r is None:
            syn_ids.append(int(b.connect(s["pre"], s["post"], s["weight"], s["delay"])[0]))
            continue
        key = r["kind"]
        if key not in rule_ids:
            if r["kind"] == "pattern":
                rule = PatternRule(
                    alpha=r["alpha"], rate=r["rate"], w_max=r["w_max"], w_min=r["w_min"]
                )
            else:
                rule = NsmRule(
                    alpha=r["alpha"], rate=r["rate"], fatigue=r["fatigue"], w_max=r["w_max"]
                )
            rule_ids[key] = b.add_rule(rule, trace)
        syn_ids.append(
            int(b.connect_plastic(s["pre"], s["post"], rule_ids[key], s["weight"], s["delay"])[0])
        )
    return b.build(), syn_ids


@pytest.mark.parametrize("case", range(25))
def test_random_networks_match_brute_force_stepper(case):
    rng = random.Random(5000 + case)
    desc = _random_desc(rng)
    n = len(desc["neurons"])
    n_steps = rng.randint(30, 120)
    forced: dict[int, set[int]] = {}
    for t in range(n_steps):
        if rng.random() < 0.3:
            forced[t] = {rng.randrange(n) for _ in range(rng.randint(1, 3))}

    naive = NaiveStepper(desc)
    naive_spikes = naive.run(n_steps, forced)

    net, syn_ids = _build_from_desc(desc)
    sim = Simulator(net)
    sim.attach_spike_probe(range(n))
    res = sim.run(n_steps, forced_spikes={t: sorted(v) for t, v in forced.items()})

    got: dict[int, set[int]] = {t: set() for t in range(n_steps)}
    for p in res.probes:
        if p.kind == "spike":
            for t in p.samples[:, 0]:
                got[int(t)].add(p.target)
    for t in range(n_steps):
        assert got[t] == naive_spikes[t], f"spike mismatch at step {t}"

    got_w = [sim.weight_of(s) for s in syn_ids]
    assert got_w == naive.weights()
