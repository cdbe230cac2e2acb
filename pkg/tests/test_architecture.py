"""Architecture: builder wiring against brute-force references, resource
accounting, and configuration invariants."""

from __future__ import annotations

import dataclasses
import random

import numpy as np
import pytest

from snnvision.architecture import (
    PatternNetConfig,
    build,
    config_digest,
    count_resources,
    manifest,
)
from snnvision.architecture.config import TUPLE_SIDE, ConfigError
from snnvision.engine import Simulator
from snnvision.grid import GRID_SIDE, partition_bounds, pixel_id, strip_of

from oracles.convolution import kernel_drive

SIDE = GRID_SIDE


@pytest.fixture(scope="module")
def built():
    return build(PatternNetConfig())


def _synapse_table(net):
    """(pre, post, weight) aligned flat views of the fixed+plastic synapses."""
    return net.syn_pre, net.syn_post, net.syn_weight0


def _drive_from_table(net, source_ids, target_ids, active_sources):
    """Summed synaptic weight into each target from the active source set."""
    pre, post, weight = _synapse_table(net)
    active = np.isin(pre, np.fromiter(active_sources, dtype=np.int64, count=len(active_sources)))
    relevant = active & np.isin(post, target_ids)
    drive = np.zeros(net.n_neurons, dtype=np.int64)
    np.add.at(drive, post[relevant], weight[relevant])
    return drive[target_ids]


def _single_source_map(net, source_ids, target_ids):
    """target id for each source, asserting exactly one edge per source."""
    pre, post, _ = _synapse_table(net)
    mask = np.isin(pre, source_ids) & np.isin(post, target_ids)
    pre_sel, post_sel = pre[mask], post[mask]
    mapping = {}
    for p, q in zip(pre_sel, post_sel):
        assert p not in mapping, f"source {p} has multiple edges into the layer"
        mapping[int(p)] = int(q)
    assert set(mapping) == {int(i) for i in source_ids}
    return mapping


def _hold_motor(motor, t0, n):
    return {t: [motor] for t in range(t0, t0 + n)}


def _merge_forced(*dicts):
    out: dict[int, list[int]] = {}
    for d in dicts:
        for t, ids in d.items():
            out.setdefault(t, []).extend(ids)
    return out


def _stroke_rows(rows):
    return [pixel_id(x, y) for y in rows for x in range(SIDE)]


class TestFeatureKernels:
    @pytest.mark.parametrize("case", range(6))
    def test_wiring_matches_brute_force_drive(self, built, case):
        rng = random.Random(300 + case)
        cfg = built.config
        net = built.network
        pixels = rng.sample(range(SIDE * SIDE), rng.randint(10, 60))
        active_ids = [int(built.handles.input_ids[p]) for p in pixels]
        active_xy = [(p % SIDE, p // SIDE) for p in pixels]
        for f in ("h", "v"):
            oracle = kernel_drive(
                active_xy, f, cfg.kernel_center_weight, cfg.kernel_flank_weight, side=SIDE
            )
            fmap = built.handles.features[f]
            got = _drive_from_table(net, built.handles.input_ids, fmap, active_ids)
            for y in range(SIDE):
                for x in range(SIDE):
                    assert got[y * SIDE + x] == oracle[(y, x)], (f, x, y)

    def test_border_cells_have_clipped_fan_in(self, built):
        pre, post, _ = _synapse_table(built.network)
        fmap = built.handles.features["h"]
        input_set = set(int(i) for i in built.handles.input_ids)
        fan_in = {}
        for p, q in zip(pre, post):
            if int(q) in (int(fmap[0]), int(fmap[7 * SIDE + 7])) and int(p) in input_set:
                fan_in[int(q)] = fan_in.get(int(q), 0) + 1
        assert fan_in[int(fmap[0])] == 16  # corner: 4x4 of the 7x7 survives
        assert fan_in[int(fmap[7 * SIDE + 7])] == 49  # interior: full window

    def test_orientation_selectivity(self, built):
        """A thick horizontal stroke drives the on-stroke cells of the
        horizontal map every settled step while the vertical map's interior
        stays silent (border cells see an end-stop artifact of the clipped
        kernel, so the claim is made away from the edges); the transpose
        drives the vertical map."""
        net = built.network
        h = built.handles
        n = 30
        horiz = _stroke_rows(range(6, 10))  # middle strip of the 5-partition
        vert = [pixel_id(x, y) for x in range(6, 10) for y in range(SIDE)]
        cases = (
            (horiz, "h", "v", [pixel_id(x, y) for y in range(6, 10) for x in range(3, 13)]),
            (vert, "v", "h", [pixel_id(x, y) for x in range(6, 10) for y in range(3, 13)]),
        )
        for pixels, hot, cold, hot_interior in cases:
            sim = Simulator(net, seed=0)
            hot_ids = [int(h.features[hot][p]) for p in hot_interior]
            cold_ids = [
                int(h.features[cold][y * SIDE + x])
                for y in range(SIDE)
                for x in range(SIDE)
                if 3 <= x <= 12 and 3 <= y <= 12
            ]
            sim.attach_spike_probe(hot_ids + cold_ids)
            forced = _merge_forced(
                {t: list(pixels) for t in range(n)}, _hold_motor(h.motor, 0, n)
            )
            res = sim.run(n, forced_spikes=forced)
            fired_at = {p.target: set(p.samples[:, 0]) for p in res.probes if p.kind == "spike"}
            for i in cold_ids:
                assert not fired_at[i], (cold, i)
            for i in hot_ids:
                assert set(range(5, n)) <= fired_at[i], (hot, i)

    def test_feature_threshold_override(self):
        cfg = PatternNetConfig()
        theta = np.arange(2 * SIDE * SIDE, dtype=np.int64) + 7
        result = build(cfg, feature_thresholds=theta)
        flat = np.concatenate([result.handles.features[f] for f in ("h", "v")])
        assert np.array_equal(result.network.threshold[flat], theta)
        with pytest.raises(ValueError, match="shape"):
            build(cfg, feature_thresholds=np.ones(3, dtype=np.int64))


class TestPoolingWiring:
    def test_learning_pool_partition(self, built):
        net = built.network
        for f in ("h", "v"):
            mapping = _single_source_map(
                net, built.handles.features[f], built.handles.learn_pools[f]
            )
            pools = built.handles.learn_pools[f]
            for p in range(SIDE * SIDE):
                y, x = divmod(p, SIDE)
                want = int(pools[strip_of(y, TUPLE_SIDE) * TUPLE_SIDE + strip_of(x, TUPLE_SIDE)])
                assert mapping[int(built.handles.features[f][p])] == want

    def test_relays_are_one_to_one(self, built):
        net = built.network
        for f in ("h", "v"):
            mapping = _single_source_map(net, built.handles.features[f], built.handles.relays[f])
            for p in range(SIDE * SIDE):
                assert mapping[int(built.handles.features[f][p])] == int(
                    built.handles.relays[f][p]
                )

    @pytest.mark.parametrize("scale", [5, 7, 9, 11])
    def test_recognition_pool_partition(self, built, scale):
        net = built.network
        for f in ("h", "v"):
            mapping = _single_source_map(
                net, built.handles.relays[f], built.handles.recog_pools[(f, scale)]
            )
            pools = built.handles.recog_pools[(f, scale)]
            for p in range(SIDE * SIDE):
                y, x = divmod(p, SIDE)
                want = int(pools[strip_of(y, scale) * scale + strip_of(x, scale)])
                assert mapping[int(built.handles.relays[f][p])] == want

    def test_windows_enumerate_tuple_grids(self, built):
        cfg = built.config
        assert len(built.windows) == cfg.n_tuples
        k = 0
        for scale, grid_side in cfg.scale_groups:
            for jr in range(grid_side):
                for jc in range(grid_side):
                    w = built.windows[k]
                    assert (w.index, w.scale, w.offset) == (k, scale, (jr, jc))
                    for f in ("h", "v"):
                        want = [
                            int(built.handles.recog_pools[(f, scale)][(jr + r) * scale + (jc + c)])
                            for r in range(TUPLE_SIDE)
                            for c in range(TUPLE_SIDE)
                        ]
                        assert list(w.pools[f]) == want
                        assert w.on[f].shape == (cfg.cells_per_window,)
                        assert w.off[f].shape == (cfg.cells_per_window,)
                    k += 1

    def test_scale5_window_sees_learning_partition(self, built):
        """The coarsest window reads pixels through the same 5x5 partition the
        learning pathway uses, so a pattern learned through the pools is what
        that window reports at recognition time."""
        window = built.windows[0]
        assert window.scale == TUPLE_SIDE
        for f in ("h", "v"):
            relay_map = _single_source_map(
                built.network, built.handles.relays[f], built.handles.recog_pools[(f, 5)]
            )
            pool_cells = {
                int(cell): i for i, cell in enumerate(built.handles.recog_pools[(f, 5)])
            }
            for p in range(SIDE * SIDE):
                y, x = divmod(p, SIDE)
                through_relay = pool_cells[relay_map[int(built.handles.relays[f][p])]]
                through_learning = strip_of(y, TUPLE_SIDE) * TUPLE_SIDE + strip_of(x, TUPLE_SIDE)
                assert through_relay == through_learning

    def test_mapping_fan_in_per_cell(self, built):
        """Every ON/OFF pair hears exactly two sources: its recognition-pool
        cell and the matching learning-pool cell."""
        pre, post, weight = _synapse_table(built.network)
        cfg = built.config
        window = built.windows[17]  # arbitrary scale-9 window
        lp = built.handles.learn_pools["h"]
        for cell in (0, 12, 24):
            on = int(window.on["h"][cell])
            mask = post == on
            sources = set(int(p) for p in pre[mask])
            assert sources == {int(window.pools["h"][cell]), int(lp[cell])}
            assert all(int(w) == cfg.logic_weight for w in weight[mask])


class TestMappingDynamics:
    def test_on_off_split_counts_window_cells(self, built):
        """Under a static pattern, each (window, feature) has its 25 cells
        split exactly between the ON and OFF channels once settled."""
        net = built.network
        h = built.handles
        pixels = _stroke_rows(range(6, 10))
        n = 40
        sim = Simulator(net, seed=1)
        probed = []
        for w in (built.windows[0], built.windows[17]):
            for f in ("h", "v"):
                probed.extend(int(i) for i in w.on[f])
                probed.extend(int(i) for i in w.off[f])
        sim.attach_spike_probe(probed)
        forced = _merge_forced(
            {t: list(pixels) for t in range(n)}, _hold_motor(h.motor, 0, n)
        )
        res = sim.run(n, forced_spikes=forced)
        fired_at = {p.target: set(p.samples[:, 0]) for p in res.probes if p.kind == "spike"}
        for w in (built.windows[0], built.windows[17]):
            for f in ("h", "v"):
                for t in range(20, n):
                    n_on = sum(1 for i in w.on[f] if t in fired_at[int(i)])
                    n_off = sum(1 for i in w.off[f] if t in fired_at[int(i)])
                    assert n_on + n_off == built.config.cells_per_window, (w.index, f, t)

    def test_blank_input_is_quiet_evidence(self, built):
        """With no input the OFF channel is muted: outputs see zero drive,
        nothing downstream of the mapping layer fires, and no plastic
        mapping weight leaves its starting state."""
        net = built.network
        h = built.handles
        n = 120
        sim = Simulator(net, seed=2)
        res = sim.run(n, forced_spikes=_hold_motor(h.motor, 0, n), record_probes=False)
        quiet = ["wta_pool", "nsm_latch_pool"]
        quiet += [f"outputs_g{g}" for g in range(built.config.n_output_groups)]
        quiet += [f"wta_g{g}" for g in range(built.config.n_output_groups)]
        for name in quiet:
            assert res.spike_counts[:, net.group_names.index(name)].sum() == 0, name
        assert np.all(res.not_railed == res.not_railed[0])
        # the silence detector is what holds OFF down
        assert res.spike_counts[20:, net.group_names.index("silence_detector")].all()

    def test_motor_holds_learning_closed(self, built):
        """While the motor line runs, no memory unit can start an episode even
        with a rich pattern present.  The gates blip for the first two steps
        while the motor veto loops around, which is why presentations must be
        motor-covered from their very first step; the blips land on vetoed
        latches and nothing downstream moves."""
        net = built.network
        h = built.handles
        pixels = _stroke_rows(range(6, 10)) + [
            pixel_id(x, y) for x in range(6, 10) for y in range(SIDE)
        ]
        n = 150
        sim = Simulator(net, seed=3)
        latches = [unit["latch"] for unit in h.nsm]
        sim.attach_spike_probe(latches)
        forced = _merge_forced(
            {t: sorted(set(pixels)) for t in range(n)}, _hold_motor(h.motor, 0, n)
        )
        res = sim.run(n, forced_spikes=forced)
        for probe in res.probes:
            assert probe.samples.shape[0] == 0, f"latch {probe.target} ignited"
        for g in range(built.config.n_output_groups):
            assert res.spike_counts[4:, net.group_names.index(f"nsm_g{g}")].sum() == 0
        assert np.all(res.not_railed == res.not_railed[0])


class TestResources:
    def test_default_counts(self):
        report = count_resources(PatternNetConfig())
        assert report.n_output_groups == 4
        assert report.neurons_per_group == 92
        assert report.plastic_mapping_per_group == 8400
        assert 8400 <= report.synapses_per_group <= 8600
        assert report.n_plastic_mapping == 4 * 8400
        assert report.n_plastic_disable == 4

    @pytest.mark.parametrize("n_groups", [1, 2, 6, 8])
    def test_marginal_cost_is_constant(self, n_groups):
        cfg = dataclasses.replace(PatternNetConfig(), n_output_groups=n_groups)
        report = count_resources(cfg)
        assert report.neurons_per_group == 92
        assert report.plastic_mapping_per_group == 8400
        assert 8400 <= report.synapses_per_group <= 8600
        assert report.n_plastic_disable == n_groups

    def test_manifest_inventory(self):
        cfg = PatternNetConfig()
        m = manifest(cfg)
        pops = m["populations"]
        assert pops["input"] == SIDE * SIDE
        assert pops["motor"] == 1
        assert pops["feature_h"] == pops["feature_v"] == SIDE * SIDE
        assert pops["learn_pool_h"] == TUPLE_SIDE * TUPLE_SIDE
        for scale, _ in cfg.scale_groups:
            assert pops[f"recog_pool_h_{scale}"] == scale * scale
        assert pops["mapping_on"] == pops["mapping_off"] == cfg.n_tuples * 2 * 25
        for g in range(cfg.n_output_groups):
            assert pops[f"outputs_g{g}"] == cfg.n_tuples
            assert pops[f"nsm_g{g}"] == 7
        assert m["n_tuples"] == 84
        assert m["resources"]["n_neurons"] == 10660

    def test_window_count_is_sum_of_grid_squares(self):
        cfg = PatternNetConfig()
        assert cfg.n_tuples == sum(g * g for _, g in cfg.scale_groups) == 84
        result = build(cfg)
        assert len(result.windows) == 84

    def test_plastic_split_matches_handles(self, built):
        net = built.network
        h = built.handles
        assert sum(ids.shape[0] for ids in h.mapping_plastic) == 4 * 8400
        assert len(h.disable_synapses) == 4
        for g, syn in enumerate(h.disable_synapses):
            spec = net.synapse(syn)
            assert spec.pre == h.nsm[g]["gate"]
            assert spec.post == h.nsm[g]["latch"]
            assert spec.weight == built.config.nsm_w_max


class TestConfigContract:
    @pytest.mark.parametrize(
        "kwargs, match",
        [
            ({"n_output_groups": 0}, "n_output_groups"),
            ({"scale_groups": ((5, 2),)}, "tuple grid side"),
            ({"scale_groups": ((5, 1), (5, 1))}, "duplicate"),
            ({"scale_groups": ((4, 0),)}, "outside"),
            ({"kernel_flank_weight": -8}, "near-balanced"),
            ({"kernel_flank_weight": 4}, "flank"),
            ({"logic_weight": 50}, "logic_weight"),
            ({"inhibition_weight": -100}, "veto"),
            ({"latch_threshold": 0}, "latch_threshold"),
            ({"latch_pool_weight": 5}, "inhibitory"),
            ({"latch_sustain_weight": 200}, "depletion boundary"),
            ({"gate_latch_delay_step": 5}, "stagger|too small"),
            ({"gate_current_decay": 0.0}, "gate_current_decay"),
            ({"stimulate_weight": 100}, "stimulate_weight"),
            ({"output_voltage_decay": 0.0}, "output_voltage_decay"),
            ({"pattern_w_min": 64}, "rails"),
            ({"mapping_off_bias": 10}, "tonically"),
        ],
    )
    def test_invalid_configs_rejected(self, kwargs, match):
        with pytest.raises(ConfigError, match=match):
            PatternNetConfig(**kwargs)

    def test_dict_round_trip(self):
        cfg = dataclasses.replace(PatternNetConfig(), n_output_groups=6)
        assert PatternNetConfig.from_dict(cfg.to_dict()) == cfg

    def test_unknown_keys_rejected(self):
        data = PatternNetConfig().to_dict()
        data["bogus_knob"] = 1
        with pytest.raises(ConfigError, match="bogus_knob"):
            PatternNetConfig.from_dict(data)

    def test_digest_tracks_content(self):
        base = PatternNetConfig()
        assert config_digest(base) == config_digest(PatternNetConfig())
        tweaked = dataclasses.replace(base, feature_threshold=base.feature_threshold + 1)
        assert config_digest(base) != config_digest(tweaked)
