"""Configuration for the pattern network.

Every numeric default below is a calibrated operating point of this
implementation: the values were chosen by measuring the assembled network
(feature-layer drive, output-layer separation margins, memory-unit episode
length) and are owned by this codebase, not imported from anywhere else.
Structural fields (grid sizes, kernel size, scale groups) are constrained by
hard invariants that ``validate`` enforces; dynamical fields are free to tune
within the documented bounds.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass

from ..grid import GRID_SIDE

# The readout resolution: every tuple window is TUPLE_SIDE x TUPLE_SIDE.
TUPLE_SIDE = 5


class ConfigError(ValueError):
    """Raised when a configuration violates a structural invariant."""


@dataclass(frozen=True)
class PatternNetConfig:
    """Complete parameter set for :func:`snnvision.architecture.build`.

    Structure
    ---------
    n_output_groups:
        Number of pattern slots (output groups + memory units). Capacity of
        the network: it can learn at most this many patterns.
    scale_groups:
        ``(downscale_side, tuple_grid_side)`` pairs. For each entry the
        recognition pathway pools the 16x16 feature maps down to
        ``downscale_side`` squared and reads every contiguous 5x5 window of
        the result; there are ``tuple_grid_side ** 2`` such windows, which
        forces ``tuple_grid_side == downscale_side - 4``.
    """

    # --- structure ------------------------------------------------------
    n_output_groups: int = 4
    input_side: int = GRID_SIDE
    n_features: int = 2
    kernel_size: int = 7
    scale_groups: tuple[tuple[int, int], ...] = ((5, 1), (7, 3), (9, 5), (11, 7))

    # --- feature layer ---------------------------------------------------
    # 7x7 oriented-bar kernels: +center on the 3 middle rows (columns for the
    # vertical variant), -flank on the 2 outermost rows each side. The flanks
    # nearly cancel the center response of a dense block (column sum
    # 3*center + 4*flank is held within [0, center]) so unoriented input is
    # rejected while bars crossing the orthogonal stroke still fire.
    kernel_center_weight: int = 8
    kernel_flank_weight: int = -4
    feature_threshold: int = 140
    feature_bias: int = 0
    feature_current_decay: float = 0.25
    feature_voltage_decay: float = 1.0

    # --- generic logic fabric ---------------------------------------------
    # Relays, pools and mapping neurons are memoryless: they fire exactly when
    # the same-step drive reaches threshold. One source spike (logic_weight)
    # clears logic_threshold; one inhibition spike (inhibition_weight) vetoes
    # any number of concurrent excitatory sources a layer receives.
    logic_weight: int = 200
    logic_threshold: int = 100
    inhibition_weight: int = -300
    strong_inhibition_weight: int = -1200

    # --- mapping layer (ON/OFF pairs feeding the outputs) -----------------
    # Mapping units retain synaptic current (decay 0.25), which converts the
    # graded firing rates of their source pools into near-binary activity:
    # a pool firing even a third of the time drives its ON unit every step
    # and vetoes the OFF unit every step, while a quiet pool leaves OFF
    # firing tonically.  The ON and OFF rate knees are matched so the
    # window where both sides fire is negligible.
    mapping_off_bias: int = 100
    mapping_off_weight: int = -700
    mapping_current_decay: float = 0.25

    # --- output layer ------------------------------------------------------
    output_threshold: int = 4000
    output_voltage_decay: float = 0.5
    output_refractory: int = 2

    # --- plastic mapping->output rule --------------------------------------
    pattern_w_max: int = 64
    pattern_w_min: int = -64
    pattern_alpha: float = 0.5
    pattern_rate: float = 2.0**-8
    pattern_trace_impulse: float = 0.05
    pattern_trace_tau: float = 20.0

    # --- memory units (one per output group) -------------------------------
    nsm_w_max: int = 64
    nsm_alpha: float = 1240 / 4096
    nsm_rate: float = 0.25
    nsm_fatigue: float = 0.0625
    nsm_trace_impulse: float = 2 / 4096
    nsm_trace_tau: float = 2000.0
    latch_threshold: int = 33
    latch_sustain_weight: int = 97
    latch_pool_weight: int = -64
    gate_current_decay: float = 0.25
    gate_latch_delay_base: int = 1
    gate_latch_delay_step: int = 14
    latch_pool_delay: int = 4
    selector_relay_delay: int = 10
    relay_stimulator_delay: int = 10
    stimulate_weight: int = 4000

    # --- arbitration --------------------------------------------------------
    arbiter_drive: int = 400
    arbiter_threshold: int = 300
    bias_unit_level: int = 100
    detector_drive: int = 400
    detector_threshold: int = 60
    detector_current_decay: float = 0.05
    silence_bias: int = 50
    silence_threshold: int = 40
    silence_feature_weight: int = -2
    silence_current_decay: float = 0.5

    # --- winner-take-all ------------------------------------------------------
    wta_drive: int = 100
    wta_threshold: int = 300
    wta_voltage_decay: float = 0.05
    wta_refractory: int = 4
    wta_pool_weight: int = -40
    wta_bias_step: int = -1

    def __post_init__(self) -> None:
        self.validate()

    # -- derived structure --------------------------------------------------

    @property
    def n_pixels(self) -> int:
        return self.input_side * self.input_side

    @property
    def n_tuples(self) -> int:
        return sum(side * side for _, side in self.scale_groups)

    @property
    def cells_per_window(self) -> int:
        return TUPLE_SIDE * TUPLE_SIDE

    @property
    def mapping_per_tuple(self) -> int:
        """ON + OFF mapping neurons serving one tuple (both features)."""
        return 2 * self.n_features * self.cells_per_window

    @property
    def n_mapping(self) -> int:
        """Total mapping neurons (shared across output groups)."""
        return self.n_tuples * self.mapping_per_tuple

    @property
    def plastic_per_group(self) -> int:
        """Mapping->output plastic synapses in one output group."""
        return self.n_tuples * self.mapping_per_tuple

    # -- validation ---------------------------------------------------------

    def validate(self) -> None:
        if self.input_side != GRID_SIDE:
            raise ConfigError(f"input_side must be {GRID_SIDE}, got {self.input_side}")
        if self.n_features != 2:
            raise ConfigError("exactly two feature maps (horizontal, vertical) are supported")
        if self.kernel_size != 7:
            raise ConfigError("kernel_size must be 7")
        if not 1 <= self.n_output_groups <= 64:
            raise ConfigError("n_output_groups must be in [1, 64]")
        if not self.scale_groups:
            raise ConfigError("scale_groups must not be empty")
        seen_scales = set()
        for downscale, grid_side in self.scale_groups:
            if downscale in seen_scales:
                raise ConfigError(f"duplicate downscale size {downscale}")
            seen_scales.add(downscale)
            if not TUPLE_SIDE <= downscale <= self.input_side:
                raise ConfigError(
                    f"downscale size {downscale} outside [{TUPLE_SIDE}, {self.input_side}]"
                )
            expected = downscale - TUPLE_SIDE + 1
            if grid_side != expected:
                raise ConfigError(
                    f"scale group {downscale}: tuple grid side must be "
                    f"{downscale} - {TUPLE_SIDE} + 1 = {expected}, got {grid_side}"
                )
        if self.kernel_center_weight <= 0 or self.kernel_flank_weight >= 0:
            raise ConfigError("kernel weights must satisfy flank < 0 < center")
        column_sum = 3 * self.kernel_center_weight + 4 * self.kernel_flank_weight
        if not 0 <= column_sum <= self.kernel_center_weight:
            raise ConfigError(
                "kernel must be near-balanced: 0 <= 3*center + 4*flank <= center "
                f"(got center={self.kernel_center_weight}, flank={self.kernel_flank_weight})"
            )
        if self.logic_weight < self.logic_threshold:
            raise ConfigError("logic_weight must reach logic_threshold in one spike")
        if -self.inhibition_weight < self.logic_weight:
            raise ConfigError("inhibition_weight must veto one logic_weight spike")
        if self.mapping_off_bias < self.logic_threshold:
            raise ConfigError("mapping_off_bias must keep OFF units tonically firing")
        if not 0 < self.latch_threshold <= self.nsm_w_max:
            raise ConfigError("latch_threshold must lie inside (0, nsm_w_max]")
        if self.latch_pool_weight >= 0:
            raise ConfigError("latch_pool_weight must be inhibitory")
        # A latch sustains itself through its hold loop against the shared pool
        # while its memory weight w stays non-negative (drive = w + sustain + pool
        # >= threshold iff w >= boundary); the boundary must sit in [0, threshold)
        # so a depleted unit dies and can never re-arm, while a fresh unit (w at
        # the rail) still ignites from the gate alone.
        death_boundary = self.latch_threshold - self.latch_sustain_weight - self.latch_pool_weight
        if not 0 <= death_boundary < self.latch_threshold:
            raise ConfigError(
                "latch sustain/pool weights must place the depletion boundary "
                "in [0, latch_threshold)"
            )
        if self.gate_latch_delay_step < 2 * (self.latch_pool_delay + 1) + 2:
            raise ConfigError(
                "gate_latch_delay_step too small: a winner's pool inhibition must "
                "reach the next latch before that latch's first gate drive"
            )
        if not 0.0 < self.gate_current_decay <= 1.0:
            raise ConfigError("gate_current_decay must lie in (0, 1]")
        if self.arbiter_drive < self.arbiter_threshold:
            raise ConfigError("arbiter_drive must reach arbiter_threshold")
        if not 0.0 < self.output_voltage_decay <= 1.0:
            raise ConfigError("output_voltage_decay must lie in (0, 1]")
        # outputs integrate with voltage decay d: sustained drive S settles at
        # S/d, which must clear the threshold for the stimulator to work
        if self.stimulate_weight / self.output_voltage_decay <= self.output_threshold:
            raise ConfigError("stimulate_weight cannot drive outputs past threshold")
        if self.pattern_w_min >= self.pattern_w_max:
            raise ConfigError("pattern rails must satisfy w_min < w_max")
        if self.output_refractory < 0:
            raise ConfigError("output_refractory must be >= 0")

    # -- serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["scale_groups"] = [list(pair) for pair in self.scale_groups]
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "PatternNetConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "scale_groups" in kwargs:
            kwargs["scale_groups"] = tuple(
                tuple(int(x) for x in pair) for pair in kwargs["scale_groups"]
            )
        return cls(**kwargs)


def config_digest(config: PatternNetConfig) -> str:
    """Stable hex digest of a configuration, used to stamp trained state."""
    blob = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]
