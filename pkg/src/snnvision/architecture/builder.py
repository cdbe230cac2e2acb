"""Assembles the full pattern network from a :class:`PatternNetConfig`.

Layer plan (construction order, which also fixes neuron ids):

* ``input``            16x16 pixel relay (forced externally), plus ``motor``.
* ``feature_h/v``      oriented-bar detectors, 7x7 balanced kernels, stride 1,
                       same padding (border synapses clipped).
* ``learn_pool_*``     5x5 OR-pools of each feature map (learning pathway).
* ``relay_*``          one-to-one feature relays (recognition pathway; the
                       learning-hold arbiter silences them during an episode).
* ``recog_pool_*_W``   WxW OR-pools of the relays, one set per scale W.
* ``mapping_on/off``   paired cells, one pair per (tuple, feature, window
                       cell).  ON fires with its source pool; OFF fires from
                       tonic bias unless its source pool is active.  Shared by
                       every output group.
* arbitration units    novelty_gate, output_detector, learn_inhibitor,
                       recognition_hold, silence_detector, learning_hold,
                       pool_gate.
* shared pools         nsm_latch_pool (memory-unit competition),
                       wta_pool (winner-take-all competition).
* per output group     84 output neurons (one per tuple), a 7-neuron memory
                       unit, and one WTA neuron.

The only plastic synapses are mapping->output (pattern rule, 8400 per group)
and gate->latch inside each memory unit (depletion rule, 1 per group).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..engine import CompartmentParams, NetworkBuilder, NetworkSpec
from ..grid import strip_of
from ..plasticity import NsmRule, PatternRule, TraceConfig
from .config import TUPLE_SIDE, PatternNetConfig

_NSM_ROLES = (
    "gate",
    "latch",
    "hold",
    "inhib_relay",
    "selector",
    "delay_relay",
    "stimulator",
)

FEATURES = ("h", "v")


@dataclass(frozen=True)
class TupleWindow:
    """One readout tuple: a 5x5 window of one downscaled grid."""

    index: int
    scale: int
    offset: tuple[int, int]
    # 25 recognition-pool source ids per feature, in window cell order
    # (row-major r*5+c); the learning pathway drives the same cells through
    # the shared 5x5 learning pools.
    pools: dict[str, np.ndarray]
    on: dict[str, np.ndarray]
    off: dict[str, np.ndarray]


@dataclass(frozen=True)
class LayerHandles:
    input_ids: np.ndarray
    motor: int
    features: dict[str, np.ndarray]
    learn_pools: dict[str, np.ndarray]
    relays: dict[str, np.ndarray]
    recog_pools: dict[tuple[str, int], np.ndarray]
    mapping_on: np.ndarray
    mapping_off: np.ndarray
    novelty_gate: int
    output_detector: int
    learn_inhibitor: int
    recognition_hold: int
    silence_detector: int
    learning_hold: int
    pool_gate: int
    nsm_latch_pool: int
    wta_pool: int
    outputs: tuple[np.ndarray, ...]
    nsm: tuple[dict[str, int], ...]
    wta: tuple[int, ...]
    pattern_rule: int
    nsm_rule: int
    rail_groups: tuple[int, ...]
    mapping_plastic: tuple[np.ndarray, ...]
    disable_synapses: tuple[int, ...]


@dataclass(frozen=True)
class BuildResult:
    network: NetworkSpec
    handles: LayerHandles
    windows: tuple[TupleWindow, ...]
    config: PatternNetConfig


def _logic(config: PatternNetConfig, *, bias: int = 0, threshold: int | None = None):
    """Memoryless unit: spikes exactly when same-step drive reaches threshold."""
    return CompartmentParams(
        threshold=config.logic_threshold if threshold is None else threshold,
        bias=bias,
        current_decay=1.0,
        voltage_decay=1.0,
    )


def build(
    config: PatternNetConfig,
    *,
    feature_thresholds: np.ndarray | None = None,
    feature_biases: np.ndarray | None = None,
) -> BuildResult:
    """Construct the network.

    feature_thresholds / feature_biases:
        optional per-neuron overrides for the 2*256 feature neurons in layer
        order (all of ``feature_h`` then all of ``feature_v``); used by the
        parameter-robustness experiments.
    """
    cfg = config
    side = cfg.input_side
    b = NetworkBuilder()

    input_params = CompartmentParams(threshold=2**30)
    input_ids = b.add_population("input", side * side, input_params, is_input=True)
    motor = b.add_neuron("motor", input_params, is_input=True)

    feature_params = CompartmentParams(
        threshold=cfg.feature_threshold,
        bias=cfg.feature_bias,
        current_decay=cfg.feature_current_decay,
        voltage_decay=cfg.feature_voltage_decay,
    )
    features = {f: b.add_population(f"feature_{f}", side * side, feature_params) for f in FEATURES}
    if feature_thresholds is not None or feature_biases is not None:
        n_feat = 2 * side * side
        thresholds = (
            np.full(n_feat, cfg.feature_threshold, dtype=np.int64)
            if feature_thresholds is None
            else np.asarray(feature_thresholds, dtype=np.int64)
        )
        biases = (
            np.full(n_feat, cfg.feature_bias, dtype=np.int64)
            if feature_biases is None
            else np.asarray(feature_biases, dtype=np.int64)
        )
        if thresholds.shape != (n_feat,) or biases.shape != (n_feat,):
            raise ValueError(f"feature overrides must have shape ({n_feat},)")
        flat_ids = np.concatenate([features[f] for f in FEATURES])
        for i, th, bi in zip(flat_ids, thresholds, biases):
            b.set_params(
                int(i),
                CompartmentParams(
                    threshold=int(th),
                    bias=int(bi),
                    current_decay=cfg.feature_current_decay,
                    voltage_decay=cfg.feature_voltage_decay,
                ),
            )

    learn_pools = {
        f: b.add_population(f"learn_pool_{f}", TUPLE_SIDE * TUPLE_SIDE, _logic(cfg))
        for f in FEATURES
    }
    relays = {f: b.add_population(f"relay_{f}", side * side, _logic(cfg)) for f in FEATURES}
    recog_pools: dict[tuple[str, int], np.ndarray] = {}
    for scale, _ in cfg.scale_groups:
        for f in FEATURES:
            recog_pools[(f, scale)] = b.add_population(
                f"recog_pool_{f}_{scale}", scale * scale, _logic(cfg)
            )

    n_tuples = cfg.n_tuples
    cells = cfg.cells_per_window
    mapping_on = b.add_population(
        "mapping_on",
        n_tuples * 2 * cells,
        CompartmentParams(
            threshold=cfg.logic_threshold,
            current_decay=cfg.mapping_current_decay,
            voltage_decay=1.0,
        ),
    )
    mapping_off = b.add_population(
        "mapping_off",
        n_tuples * 2 * cells,
        CompartmentParams(
            threshold=cfg.logic_threshold,
            bias=cfg.mapping_off_bias,
            current_decay=cfg.mapping_current_decay,
            voltage_decay=1.0,
        ),
    )

    novelty_gate = b.add_neuron(
        "novelty_gate", _logic(cfg, bias=cfg.bias_unit_level, threshold=cfg.bias_unit_level)
    )
    output_detector = b.add_neuron(
        "output_detector",
        CompartmentParams(
            threshold=cfg.detector_threshold,
            current_decay=cfg.detector_current_decay,
            voltage_decay=1.0,
        ),
    )
    learn_inhibitor = b.add_neuron("learn_inhibitor", _logic(cfg, threshold=cfg.arbiter_threshold))
    recognition_hold = b.add_neuron(
        "recognition_hold", _logic(cfg, threshold=cfg.arbiter_threshold)
    )
    silence_detector = b.add_neuron(
        "silence_detector",
        CompartmentParams(
            threshold=cfg.silence_threshold,
            bias=cfg.silence_bias,
            current_decay=cfg.silence_current_decay,
            voltage_decay=1.0,
        ),
    )
    learning_hold = b.add_neuron("learning_hold", _logic(cfg, threshold=cfg.arbiter_threshold))
    # Tonic veto on the learning pools, lifted only while learning_hold runs, so
    # broadcast content cannot leak into the mapping layer outside an episode.
    pool_gate = b.add_neuron(
        "pool_gate", _logic(cfg, bias=cfg.arbiter_threshold, threshold=cfg.arbiter_threshold)
    )
    nsm_latch_pool = b.add_neuron("nsm_latch_pool", _logic(cfg))
    wta_pool = b.add_neuron("wta_pool", _logic(cfg))

    output_params = CompartmentParams(
        threshold=cfg.output_threshold,
        current_decay=1.0,
        voltage_decay=cfg.output_voltage_decay,
        refractory_period=cfg.output_refractory,
    )
    latch_params = _logic(cfg, threshold=cfg.latch_threshold)
    arbiter_params = _logic(cfg, threshold=cfg.arbiter_threshold)

    outputs: list[np.ndarray] = []
    nsm_units: list[dict[str, int]] = []
    wta_ids: list[int] = []
    for g in range(cfg.n_output_groups):
        outputs.append(b.add_population(f"outputs_g{g}", n_tuples, output_params))
        unit_ids = b.add_population(f"nsm_g{g}", len(_NSM_ROLES), _logic(cfg))
        unit = {role: int(unit_ids[k]) for k, role in enumerate(_NSM_ROLES)}
        # Gates keep a decaying memory of inhibition: a sustained veto drives the
        # current deep negative, so a one-step dropout of the veto chain cannot
        # produce a gate spike, while a genuine release ramps back to tonic
        # every-step firing within a few steps.
        b.set_params(
            unit["gate"],
            CompartmentParams(
                threshold=cfg.bias_unit_level,
                bias=cfg.bias_unit_level,
                current_decay=cfg.gate_current_decay,
                voltage_decay=1.0,
            ),
        )
        b.set_params(unit["latch"], latch_params)
        for role in ("selector", "delay_relay", "stimulator"):
            b.set_params(unit[role], arbiter_params)
        nsm_units.append(unit)
        wta_ids.append(
            b.add_neuron(
                f"wta_g{g}",
                CompartmentParams(
                    threshold=cfg.wta_threshold,
                    bias=cfg.wta_bias_step * g,
                    current_decay=1.0,
                    voltage_decay=cfg.wta_voltage_decay,
                    refractory_period=cfg.wta_refractory,
                ),
            )
        )

    # ------------------------------------------------------------------ rules
    pattern_rule = b.add_rule(
        PatternRule(
            alpha=cfg.pattern_alpha,
            rate=cfg.pattern_rate,
            w_max=cfg.pattern_w_max,
            w_min=cfg.pattern_w_min,
        ),
        TraceConfig(impulse=cfg.pattern_trace_impulse, decay_tau=cfg.pattern_trace_tau),
    )
    nsm_rule = b.add_rule(
        NsmRule(
            alpha=cfg.nsm_alpha,
            rate=cfg.nsm_rate,
            fatigue=cfg.nsm_fatigue,
            w_max=cfg.nsm_w_max,
        ),
        TraceConfig(impulse=cfg.nsm_trace_impulse, decay_tau=cfg.nsm_trace_tau),
    )

    # --------------------------------------------------------- feature kernels
    # Horizontal map: +center on the 3 middle kernel rows, -flank on the two
    # outermost rows each side, across all 7 columns.  Vertical map is the
    # transpose.  Border windows are clipped (same padding).
    half = cfg.kernel_size // 2
    for f in FEATURES:
        pre_list: list[int] = []
        post_list: list[int] = []
        w_list: list[int] = []
        fmap = features[f]
        for y in range(side):
            for x in range(side):
                post = int(fmap[y * side + x])
                for dy in range(-half, half + 1):
                    sy = y + dy
                    if not 0 <= sy < side:
                        continue
                    for dx in range(-half, half + 1):
                        sx = x + dx
                        if not 0 <= sx < side:
                            continue
                        band = dy if f == "h" else dx
                        weight = (
                            cfg.kernel_center_weight
                            if abs(band) <= 1
                            else cfg.kernel_flank_weight
                        )
                        pre_list.append(int(input_ids[sy * side + sx]))
                        post_list.append(post)
                        w_list.append(weight)
        b.connect(np.array(pre_list), np.array(post_list), np.array(w_list))

    # ------------------------------------------------- pathways off the features
    for f in FEATURES:
        fmap = features[f]
        # silence detector listens to every feature neuron
        b.connect(fmap, silence_detector, cfg.silence_feature_weight)
        # one-to-one recognition relays
        b.connect(fmap, relays[f], cfg.logic_weight)
        # learning pathway: 16x16 -> 5x5 OR-pool
        pool_index = np.array(
            [
                strip_of(y, TUPLE_SIDE) * TUPLE_SIDE + strip_of(x, TUPLE_SIDE)
                for y in range(side)
                for x in range(side)
            ]
        )
        b.connect(fmap, learn_pools[f][pool_index], cfg.logic_weight)
        # recognition pathway: relays -> per-scale OR-pools
        for scale, _ in cfg.scale_groups:
            pool_index = np.array(
                [
                    strip_of(y, scale) * scale + strip_of(x, scale)
                    for y in range(side)
                    for x in range(side)
                ]
            )
            b.connect(relays[f], recog_pools[(f, scale)][pool_index], cfg.logic_weight)

    # ------------------------------------------------------------- tuple windows
    def on_id(t: int, fi: int, cell: int) -> int:
        return int(mapping_on[(t * 2 + fi) * cells + cell])

    def off_id(t: int, fi: int, cell: int) -> int:
        return int(mapping_off[(t * 2 + fi) * cells + cell])

    windows: list[TupleWindow] = []
    t_index = 0
    for scale, grid_side in cfg.scale_groups:
        for jr in range(grid_side):
            for jc in range(grid_side):
                pools: dict[str, np.ndarray] = {}
                on_map: dict[str, np.ndarray] = {}
                off_map: dict[str, np.ndarray] = {}
                for fi, f in enumerate(FEATURES):
                    src = np.array(
                        [
                            int(recog_pools[(f, scale)][(jr + r) * scale + (jc + c)])
                            for r in range(TUPLE_SIDE)
                            for c in range(TUPLE_SIDE)
                        ]
                    )
                    ons = np.array([on_id(t_index, fi, cell) for cell in range(cells)])
                    offs = np.array([off_id(t_index, fi, cell) for cell in range(cells)])
                    # recognition pathway into the tuple's ON/OFF pairs
                    b.connect(src, ons, cfg.logic_weight)
                    b.connect(src, offs, cfg.mapping_off_weight)
                    # learning pathway broadcasts the same 5x5 to every tuple
                    lp = learn_pools[f]
                    b.connect(lp, ons, cfg.logic_weight)
                    b.connect(lp, offs, cfg.mapping_off_weight)
                    pools[f] = src
                    on_map[f] = ons
                    off_map[f] = offs
                windows.append(
                    TupleWindow(
                        index=t_index,
                        scale=scale,
                        offset=(jr, jc),
                        pools=pools,
                        on=on_map,
                        off=off_map,
                    )
                )
                t_index += 1

    # ------------------------------------------------------------- arbitration
    # recognition_hold fires while any of its hold conditions is live (recognized
    # output, blank input, or motor activity) and learning_hold is quiet; the
    # novelty readout is its complement restricted to the output condition.
    b.connect(output_detector, novelty_gate, cfg.inhibition_weight)
    b.connect(output_detector, recognition_hold, cfg.arbiter_drive)
    b.connect(silence_detector, recognition_hold, cfg.arbiter_drive)
    b.connect(motor, recognition_hold, cfg.arbiter_drive)
    b.connect(recognition_hold, learn_inhibitor, cfg.arbiter_drive)
    b.connect(motor, learn_inhibitor, cfg.arbiter_drive)
    b.connect(learning_hold, recognition_hold, cfg.strong_inhibition_weight)
    b.connect(learning_hold, silence_detector, cfg.inhibition_weight)
    b.connect(learning_hold, pool_gate, cfg.strong_inhibition_weight)
    # Blank input must read as "no evidence", not "everything absent": while
    # the silence detector runs, the OFF channel is muted so resting drive to
    # the outputs is zero.
    b.connect(silence_detector, mapping_off, cfg.inhibition_weight)
    for f in FEATURES:
        b.connect(learning_hold, relays[f], cfg.inhibition_weight)
        b.connect(pool_gate, learn_pools[f], cfg.inhibition_weight)

    # ------------------------------------------------------------ output groups
    rail_groups: list[int] = []
    mapping_plastic: list[np.ndarray] = []
    disable_synapses: list[int] = []
    tuple_of_on = np.arange(n_tuples * 2 * cells) // (2 * cells)
    for g in range(cfg.n_output_groups):
        out = outputs[g]
        unit = nsm_units[g]
        wta = wta_ids[g]
        rail = b.add_rail_group(f"group{g}")
        rail_groups.append(rail)

        posts = out[tuple_of_on]
        syn_on = b.connect_plastic(mapping_on, posts, pattern_rule, weight=0, rail_group=rail)
        syn_off = b.connect_plastic(mapping_off, posts, pattern_rule, weight=0, rail_group=rail)
        mapping_plastic.append(np.concatenate([syn_on, syn_off]))

        # memory unit
        delay_gl = cfg.gate_latch_delay_base + cfg.gate_latch_delay_step * g
        disable = b.connect_plastic(
            unit["gate"], unit["latch"], nsm_rule, weight=cfg.nsm_w_max, delay=delay_gl
        )
        disable_synapses.append(int(disable[0]))
        b.connect(unit["latch"], unit["hold"], cfg.logic_weight)
        b.connect(unit["hold"], unit["latch"], cfg.latch_sustain_weight)
        b.connect(unit["latch"], unit["inhib_relay"], cfg.logic_weight)
        b.connect(unit["inhib_relay"], nsm_latch_pool, cfg.logic_weight, delay=cfg.latch_pool_delay)
        b.connect(nsm_latch_pool, unit["latch"], cfg.latch_pool_weight, delay=cfg.latch_pool_delay)
        # During an episode the pool silences every gate so that idle units do
        # not accumulate depletion trace; the winner's latch feeds its own gate
        # back to exactly cancel that veto, keeping only the winner's gate on.
        b.connect(nsm_latch_pool, unit["gate"], cfg.inhibition_weight)
        b.connect(unit["latch"], unit["gate"], -cfg.inhibition_weight)
        b.connect(unit["latch"], unit["selector"], cfg.arbiter_drive)
        b.connect(unit["selector"], learning_hold, cfg.arbiter_drive)
        b.connect(unit["selector"], unit["delay_relay"], cfg.arbiter_drive, delay=cfg.selector_relay_delay)
        b.connect(unit["delay_relay"], unit["stimulator"], cfg.arbiter_drive, delay=cfg.relay_stimulator_delay)
        b.connect(unit["stimulator"], out, cfg.stimulate_weight)
        for role in ("gate", "latch", "selector"):
            b.connect(learn_inhibitor, unit[role], cfg.inhibition_weight)

        # winner-take-all readout
        b.connect(out, wta, cfg.wta_drive)
        b.connect(wta, wta_pool, cfg.logic_weight)
        b.connect(wta_pool, wta, cfg.wta_pool_weight)
        b.connect(wta, output_detector, cfg.detector_drive)

    network = b.build()
    handles = LayerHandles(
        input_ids=input_ids,
        motor=motor,
        features=features,
        learn_pools=learn_pools,
        relays=relays,
        recog_pools=recog_pools,
        mapping_on=mapping_on,
        mapping_off=mapping_off,
        novelty_gate=novelty_gate,
        output_detector=output_detector,
        learn_inhibitor=learn_inhibitor,
        recognition_hold=recognition_hold,
        silence_detector=silence_detector,
        learning_hold=learning_hold,
        pool_gate=pool_gate,
        nsm_latch_pool=nsm_latch_pool,
        wta_pool=wta_pool,
        outputs=tuple(outputs),
        nsm=tuple(nsm_units),
        wta=tuple(wta_ids),
        pattern_rule=pattern_rule,
        nsm_rule=nsm_rule,
        rail_groups=tuple(rail_groups),
        mapping_plastic=tuple(mapping_plastic),
        disable_synapses=tuple(disable_synapses),
    )
    return BuildResult(network=network, handles=handles, windows=tuple(windows), config=cfg)
