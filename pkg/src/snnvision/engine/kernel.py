"""JIT-compiled step loop.

Everything dynamic is integer arithmetic; the only float work is the
plasticity delta, whose factors are dyadic rationals small enough that
float64 products are exact, so results stay platform-independent.

Per-step order (the behavioural contract, mirrored by the test oracle):
  1. current-injection noise is added into the pending-delivery slot
  2. integrate u then v with Q12 leak multipliers, saturating at +/-(2^31-1);
     refractory neurons hold v at 0 and burn one refractory step
  3. natural spikes (v >= threshold outside refractory) plus forced spikes;
     spiking resets v and arms the refractory counter
  4. presynaptic traces decay; spiking trace owners add their impulse
  5. spikes fan out into the delivery ring using pre-update weights
     (a spike at t through delay d arrives at t + 1 + d)
  6. plastic synapses of spiking postsynaptic neurons update, reading the
     post-impulse trace of their presynaptic neuron
  7. probes sample end-of-step state
"""

from __future__ import annotations

import numpy as np
from numba import njit

SAT_MAX = 2**31 - 1
SAT_MIN = -(2**31 - 1)


@njit(cache=True)
def _splitmix64_next(state):
    state[0] = state[0] + np.uint64(0x9E3779B97F4A7C15)
    z = state[0]
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@njit(cache=True)
def run_steps(
    n_steps,
    t0,
    # static network
    threshold,
    bias,
    cur_retain,
    vol_retain,
    refractory,
    syn_indptr,
    syn_post,
    syn_delay,
    syn_rule,
    syn_pre,
    syn_rail_group,
    pp_indptr,
    pp_syn,
    rule_kind,
    rule_alpha,
    rule_rate,
    rule_fatigue,
    rule_wmax,
    rule_wmin,
    trace_retain,
    trace_impulse,
    trace_ids,
    count_group,
    # mutable state
    syn_weight,
    u,
    v,
    refrac,
    traces,
    pending,
    ring_base,
    nr_counts,
    sat_count,
    rng_state,
    # inputs
    ext_indptr,
    ext_ids,
    noise_ids,
    noise_lo,
    noise_span,
    # outputs
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
):
    n = threshold.shape[0]
    ring = pending.shape[0]
    for step in range(n_steps):
        t = t0 + step
        slot = ring_base[0]

        if noise_span > 0:
            for k in range(noise_ids.shape[0]):
                draw = _splitmix64_next(rng_state) % np.uint64(noise_span)
                pending[slot, noise_ids[k]] += noise_lo + np.int64(draw)

        n_spiked = 0
        for i in range(n):
            # widen before the Q12 product: u is stored narrow but the
            # product needs the full 43 bits
            uu = ((np.int64(u[i]) * cur_retain[i] + 2048) >> 12) + pending[slot, i] + bias[i]
            if uu > SAT_MAX:
                uu = SAT_MAX
                sat_count[0] += 1
            elif uu < SAT_MIN:
                uu = SAT_MIN
                sat_count[0] += 1
            u[i] = uu
            vv = ((np.int64(v[i]) * vol_retain[i] + 2048) >> 12) + uu
            if vv > SAT_MAX:
                vv = SAT_MAX
                sat_count[0] += 1
            elif vv < SAT_MIN:
                vv = SAT_MIN
                sat_count[0] += 1
            if refrac[i] > 0:
                refrac[i] -= 1
                v[i] = 0
            else:
                if vv >= threshold[i]:
                    v[i] = 0
                    refrac[i] = refractory[i]
                    spiked_buf[n_spiked] = i
                    n_spiked += 1
                    spiked_flag[i] = 1
                else:
                    v[i] = vv
            pending[slot, i] = 0

        for k in range(ext_indptr[step], ext_indptr[step + 1]):
            i = ext_ids[k]
            if spiked_flag[i] == 0:
                v[i] = 0
                refrac[i] = refractory[i]
                spiked_buf[n_spiked] = i
                n_spiked += 1
                spiked_flag[i] = 1

        for k in range(trace_ids.shape[0]):
            i = trace_ids[k]
            tr = traces[i]
            if tr == 0:
                if spiked_flag[i] == 1:
                    traces[i] = trace_impulse[i]
                continue
            tr = (tr * trace_retain[i] + 2048) >> 12
            if spiked_flag[i] == 1:
                tr += trace_impulse[i]
            traces[i] = tr

        # delay < ring always holds, so one conditional subtract replaces the
        # modulo (a hardware division) on the hottest line in the kernel
        for si in range(n_spiked):
            i = spiked_buf[si]
            for k in range(syn_indptr[i], syn_indptr[i + 1]):
                dest = slot + 1 + syn_delay[k]
                if dest >= ring:
                    dest -= ring
                pending[dest, syn_post[k]] += syn_weight[k]

        for si in range(n_spiked):
            i = spiked_buf[si]
            for kk in range(pp_indptr[i], pp_indptr[i + 1]):
                k = pp_syn[kk]
                r = syn_rule[k]
                w = syn_weight[k]
                x1 = traces[syn_pre[k]] / 4096.0
                if rule_kind[r] == 0:
                    delta = (
                        (x1 - rule_alpha[r])
                        * (rule_wmax[r] - w)
                        * (w - rule_wmin[r])
                        * rule_rate[r]
                    )
                else:
                    delta = (rule_alpha[r] - x1) * (rule_wmax[r] - w) * rule_rate[r] - (
                        x1 * rule_fatigue[r]
                    )
                if delta != 0.0:
                    dw = np.int64(delta)
                    if dw == 0:
                        dw = 1 if delta > 0.0 else -1
                    w2 = w + dw
                    if w2 > rule_wmax[r]:
                        w2 = rule_wmax[r]
                    if w2 < rule_wmin[r]:
                        w2 = rule_wmin[r]
                    if w2 != w:
                        g = syn_rail_group[k]
                        if g >= 0:
                            was = w == rule_wmax[r] or w == rule_wmin[r]
                            now = w2 == rule_wmax[r] or w2 == rule_wmin[r]
                            if was and not now:
                                nr_counts[g] += 1
                            elif now and not was:
                                nr_counts[g] -= 1
                        syn_weight[k] = w2

        for si in range(n_spiked):
            i = spiked_buf[si]
            counts_out[step, count_group[i]] += 1
            if sp_mask[i] == 1:
                c = sp_cursor[0]
                sp_t[c] = t
                sp_id[c] = i
                sp_cursor[0] = c + 1
            spiked_flag[i] = 0
        for g in range(nr_out.shape[1]):
            nr_out[step, g] = nr_counts[g]
        for k in range(vp_ids.shape[0]):
            vp_out[step, k] = v[vp_ids[k]]
        for k in range(wp_csr.shape[0]):
            wp_out[step, k] = syn_weight[wp_csr[k]]

        ring_base[0] = (slot + 1) % ring
