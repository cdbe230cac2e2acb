"""Network construction: populations, synapses, plasticity rule bindings.

The builder accumulates scalar or vectorized connect calls and freezes them
into flat arrays (CSR by presynaptic neuron) that the step kernel consumes.
Synapse ids are insertion-ordered and stable; the CSR permutation is kept so
ids remain the public handle.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ..plasticity import (
    NSM_WEIGHT_FLOOR,
    NsmRule,
    PatternRule,
    TraceConfig,
    to_fixed,
    FP_ONE,
)
from .types import CompartmentParams, StructuralError, SynapseSpec

RULE_PATTERN = 0
RULE_NSM = 1


def _require_dyadic(name: str, value: float, max_num: int = 1 << 16) -> None:
    # bit-exact float deltas need dyadic rule constants with small numerators
    frac = Fraction(value).limit_denominator(1 << 30)
    if Fraction(value) != frac or frac.denominator & (frac.denominator - 1):
        raise StructuralError(f"{name}={value} must be an exact dyadic rational")
    if abs(frac.numerator) > max_num:
        raise StructuralError(f"{name}={value} numerator too large for exact arithmetic")


@dataclass
class _RuleBinding:
    rule: PatternRule | NsmRule
    trace: TraceConfig


@dataclass
class NetworkSpec:
    """Frozen network: parameter arrays plus population/rule metadata."""

    n_neurons: int
    threshold: np.ndarray
    bias: np.ndarray
    cur_retain: np.ndarray
    vol_retain: np.ndarray
    refractory: np.ndarray
    is_input: np.ndarray
    count_group: np.ndarray
    group_names: list[str]
    populations: dict[str, np.ndarray]
    # synapses, CSR by presynaptic neuron
    syn_indptr: np.ndarray
    syn_pre: np.ndarray
    syn_post: np.ndarray
    syn_weight0: np.ndarray
    syn_delay: np.ndarray
    syn_rule: np.ndarray
    syn_rail_group: np.ndarray
    csr_of_syn: np.ndarray  # insertion id -> csr row
    syn_of_csr: np.ndarray
    # postsynaptic index of plastic synapses
    pp_indptr: np.ndarray
    pp_syn: np.ndarray
    # rule tables
    rule_kind: np.ndarray
    rule_alpha: np.ndarray
    rule_rate: np.ndarray
    rule_fatigue: np.ndarray
    rule_wmax: np.ndarray
    rule_wmin: np.ndarray
    rules: list[_RuleBinding]
    # per-neuron trace parameters (0 where unused)
    trace_retain: np.ndarray
    trace_impulse: np.ndarray
    trace_ids: np.ndarray
    rail_group_names: list[str]
    max_delay: int

    @property
    def n_synapses(self) -> int:
        return int(self.syn_pre.shape[0])

    def synapse(self, syn_id: int) -> SynapseSpec:
        k = int(self.csr_of_syn[syn_id])
        return SynapseSpec(
            syn_id=syn_id,
            pre=int(self.syn_pre[k]),
            post=int(self.syn_post[k]),
            weight=int(self.syn_weight0[k]),
            delay=int(self.syn_delay[k]),
            rule_id=int(self.syn_rule[k]),
        )

    def ids(self, population: str) -> np.ndarray:
        return self.populations[population]


class NetworkBuilder:
    def __init__(self) -> None:
        self._params: list[CompartmentParams] = []
        self._pop_of: list[int] = []
        self._pop_names: list[str] = []
        self._pop_ids: dict[str, np.ndarray] = {}
        self._inputs: set[int] = set()
        self._pre: list[np.ndarray] = []
        self._post: list[np.ndarray] = []
        self._weight: list[np.ndarray] = []
        self._delay: list[np.ndarray] = []
        self._rule: list[np.ndarray] = []
        self._rail: list[np.ndarray] = []
        self._rules: list[_RuleBinding] = []
        self._rail_groups: list[str] = []
        self._trace_of: dict[int, tuple[int, int]] = {}  # neuron -> (retain, impulse)

    @property
    def n_neurons(self) -> int:
        return len(self._params)

    def add_population(
        self, name: str, size: int, params: CompartmentParams, *, is_input: bool = False
    ) -> np.ndarray:
        if name in self._pop_ids:
            raise StructuralError(f"duplicate population {name!r}")
        if size <= 0:
            raise StructuralError("population size must be positive")
        start = len(self._params)
        self._params.extend([params] * size)
        pop_idx = len(self._pop_names)
        self._pop_names.append(name)
        self._pop_of.extend([pop_idx] * size)
        ids = np.arange(start, start + size, dtype=np.int64)
        self._pop_ids[name] = ids
        if is_input:
            self._inputs.update(int(i) for i in ids)
        return ids

    def add_neuron(self, name: str, params: CompartmentParams, *, is_input: bool = False) -> int:
        return int(self.add_population(name, 1, params, is_input=is_input)[0])

    def set_params(self, ids: np.ndarray | int, params: CompartmentParams) -> None:
        for i in np.atleast_1d(np.asarray(ids, dtype=np.int64)):
            self._params[int(i)] = params

    def add_rule(self, rule: PatternRule | NsmRule, trace: TraceConfig) -> int:
        if to_fixed(rule.alpha) / FP_ONE != rule.alpha:
            raise StructuralError("rule alpha must lie on the Q12 grid")
        _require_dyadic("rate", rule.rate)
        if isinstance(rule, NsmRule):
            _require_dyadic("fatigue", rule.fatigue)
        self._rules.append(_RuleBinding(rule, trace))
        return len(self._rules) - 1

    def add_rail_group(self, name: str) -> int:
        self._rail_groups.append(name)
        return len(self._rail_groups) - 1

    def _check_ids(self, ids: np.ndarray) -> None:
        if ids.size and (ids.min() < 0 or ids.max() >= len(self._params)):
            raise StructuralError("synapse endpoint out of range")

    def connect(
        self,
        pre,
        post,
        weight,
        delay=0,
    ) -> np.ndarray:
        """Add fixed synapses; scalar arguments broadcast against array ones."""
        pre, post, weight, delay = np.broadcast_arrays(
            np.asarray(pre, dtype=np.int64),
            np.asarray(post, dtype=np.int64),
            np.asarray(weight, dtype=np.int64),
            np.asarray(delay, dtype=np.int64),
        )
        return self._append(pre, post, weight, delay, rule=-1, rail=-1)

    def connect_plastic(
        self,
        pre,
        post,
        rule_id: int,
        weight=0,
        delay=0,
        rail_group: int = -1,
    ) -> np.ndarray:
        if not 0 <= rule_id < len(self._rules):
            raise StructuralError(f"unknown rule id {rule_id}")
        pre, post, weight, delay = np.broadcast_arrays(
            np.asarray(pre, dtype=np.int64),
            np.asarray(post, dtype=np.int64),
            np.asarray(weight, dtype=np.int64),
            np.asarray(delay, dtype=np.int64),
        )
        binding = self._rules[rule_id]
        tr = (binding.trace.retain_fp, binding.trace.impulse_fp)
        for i in np.unique(pre):
            known = self._trace_of.get(int(i))
            if known is not None and known != tr:
                raise StructuralError(f"neuron {i} already carries a different trace config")
            self._trace_of[int(i)] = tr
        return self._append(pre, post, weight, delay, rule=rule_id, rail=rail_group)

    def _append(self, pre, post, weight, delay, rule: int, rail: int) -> np.ndarray:
        flat = [np.ravel(a) for a in (pre, post, weight, delay)]
        self._check_ids(flat[0])
        self._check_ids(flat[1])
        if flat[3].size and flat[3].min() < 0:
            raise StructuralError("negative synaptic delay")
        if flat[2].size and np.abs(flat[2]).max() >= 2**31:
            raise StructuralError("synaptic weight outside 32-bit range")
        start = sum(a.shape[0] for a in self._pre)
        self._pre.append(flat[0])
        self._post.append(flat[1])
        self._weight.append(flat[2])
        self._delay.append(flat[3])
        self._rule.append(np.full(flat[0].shape[0], rule, dtype=np.int64))
        self._rail.append(np.full(flat[0].shape[0], rail, dtype=np.int64))
        return np.arange(start, start + flat[0].shape[0], dtype=np.int64)

    def build(self) -> NetworkSpec:
        n = len(self._params)
        if n == 0:
            raise StructuralError("network has no neurons")
        # per-neuron parameters fit 32 bits (CompartmentParams bounds them at
        # the saturation limit), which halves the step kernel's memory traffic
        threshold = np.array([p.threshold for p in self._params], dtype=np.int32)
        bias = np.array([p.bias for p in self._params], dtype=np.int32)
        cur_retain = np.array([p.current_retain_fp for p in self._params], dtype=np.int32)
        vol_retain = np.array([p.voltage_retain_fp for p in self._params], dtype=np.int32)
        refractory = np.array([p.refractory_period for p in self._params], dtype=np.int32)
        is_input = np.zeros(n, dtype=bool)
        if self._inputs:
            is_input[list(self._inputs)] = True
        count_group = np.array(self._pop_of, dtype=np.int64)

        pre = np.concatenate(self._pre) if self._pre else np.empty(0, dtype=np.int64)
        post = np.concatenate(self._post) if self._post else np.empty(0, dtype=np.int64)
        weight = np.concatenate(self._weight) if self._weight else np.empty(0, dtype=np.int64)
        delay = np.concatenate(self._delay) if self._delay else np.empty(0, dtype=np.int64)
        rule = np.concatenate(self._rule) if self._rule else np.empty(0, dtype=np.int64)
        rail = np.concatenate(self._rail) if self._rail else np.empty(0, dtype=np.int64)

        order = np.argsort(pre, kind="stable")
        syn_of_csr = order
        csr_of_syn = np.empty_like(order)
        csr_of_syn[order] = np.arange(order.shape[0], dtype=np.int64)
        pre_s, post_s = pre[order], post[order]
        weight_s, delay_s = weight[order], delay[order]
        rule_s, rail_s = rule[order], rail[order]
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, pre_s + 1, 1)
        np.cumsum(indptr, out=indptr)

        plastic = np.flatnonzero(rule_s >= 0)
        pp_order = plastic[np.argsort(post_s[plastic], kind="stable")]
        pp_indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(pp_indptr, post_s[pp_order] + 1, 1)
        np.cumsum(pp_indptr, out=pp_indptr)

        kinds, alphas, rates, fatigues, wmaxs, wmins = [], [], [], [], [], []
        for b in self._rules:
            if isinstance(b.rule, PatternRule):
                kinds.append(RULE_PATTERN)
                fatigues.append(0.0)
                wmins.append(b.rule.w_min)
            else:
                kinds.append(RULE_NSM)
                fatigues.append(b.rule.fatigue)
                wmins.append(NSM_WEIGHT_FLOOR)
            alphas.append(b.rule.alpha)
            rates.append(b.rule.rate)
            wmaxs.append(b.rule.w_max)

        trace_retain = np.zeros(n, dtype=np.int64)
        trace_impulse = np.zeros(n, dtype=np.int64)
        for i, (ret, imp) in self._trace_of.items():
            trace_retain[i] = ret
            trace_impulse[i] = imp
        trace_ids = np.flatnonzero(trace_retain > 0).astype(np.int64)

        # validate plastic initial weights against their rails
        for k in plastic:
            b = self._rules[rule_s[k]]
            w = int(weight_s[k])
            if isinstance(b.rule, PatternRule):
                if not b.rule.w_min <= w <= b.rule.w_max:
                    raise StructuralError("plastic initial weight outside rails")
            elif not NSM_WEIGHT_FLOOR <= w <= b.rule.w_max:
                raise StructuralError(
                    "plastic initial weight outside upper rail / saturation floor"
                )

        # Deliveries accumulate in a 32-bit buffer, so bound the worst-case
        # one-step inbound magnitude per neuron.  Each synapse is counted at
        # the largest magnitude its weight can ever reach; the factor-of-two
        # headroom below 2**31 absorbs bias and injected noise.
        cap = np.abs(weight_s)
        for r, b in enumerate(self._rules):
            if isinstance(b.rule, PatternRule):
                rail = max(abs(b.rule.w_min), abs(b.rule.w_max))
            else:
                rail = max(abs(NSM_WEIGHT_FLOOR), abs(b.rule.w_max))
            mask = rule_s == r
            cap[mask] = np.maximum(cap[mask], rail)
        inbound = np.zeros(n, dtype=np.int64)
        np.add.at(inbound, post_s, cap)
        if inbound.size and inbound.max() > 2**30:
            worst = int(inbound.argmax())
            raise StructuralError(
                f"neuron {worst} can receive {int(inbound[worst])} in one step, "
                "beyond the 2**30 accumulation bound"
            )

        return NetworkSpec(
            n_neurons=n,
            threshold=threshold,
            bias=bias,
            cur_retain=cur_retain,
            vol_retain=vol_retain,
            refractory=refractory,
            is_input=is_input,
            count_group=count_group,
            group_names=list(self._pop_names),
            populations=dict(self._pop_ids),
            syn_indptr=indptr,
            syn_pre=pre_s,
            syn_post=post_s.astype(np.int32),
            syn_weight0=weight_s.astype(np.int32),
            syn_delay=delay_s.astype(np.int32),
            syn_rule=rule_s,
            syn_rail_group=rail_s,
            csr_of_syn=csr_of_syn,
            syn_of_csr=syn_of_csr,
            pp_indptr=pp_indptr,
            pp_syn=pp_order.astype(np.int64),
            rule_kind=np.array(kinds, dtype=np.int64),
            rule_alpha=np.array(alphas, dtype=np.float64),
            rule_rate=np.array(rates, dtype=np.float64),
            rule_fatigue=np.array(fatigues, dtype=np.float64),
            rule_wmax=np.array(wmaxs, dtype=np.int64),
            rule_wmin=np.array(wmins, dtype=np.int64),
            rules=list(self._rules),
            trace_retain=trace_retain,
            trace_impulse=trace_impulse,
            trace_ids=trace_ids,
            rail_group_names=list(self._rail_groups),
            max_delay=int(delay.max()) if delay.size else 0,
        )
