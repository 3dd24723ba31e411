"""Compiled hot loops for the cycle-accurate simulator.

The simulator is event-driven: per-cycle work is proportional to the number
of spike deliveries, not to network size.  In-flight deliveries live in a
ring buffer of RING slots indexed by cycle modulo RING, each slot holding
the summed incoming weight per target neuron.  RING covers the maximum axon
delay (15) plus the mandatory one-cycle hop, plus the slot being consumed.
"""

import numpy as np
from numba import njit

RING = 17

CHARGE_MIN = -32768
CHARGE_MAX = 32767


@njit(cache=True, nogil=True)
def advance_window(charge, ring, ring_events, pending, start_cycle, tau,
                   ev_cycles, ev_neurons, ev_lo, ev_hi,
                   thresholds, hop, syn_start, syn_post, syn_weight,
                   out_idx, touched, is_touched,
                   record, raster_neuron, raster_cycle, raster_n):
    """Advance tau cycles from start_cycle; returns (z, raster_n, pending).

    Per cycle: deliveries due this cycle and scheduled input spikes (+1
    each) are summed onto target charges, the total is clamped once to the
    16-bit range, then every neuron whose charge strictly exceeds its
    threshold fires, resets to 0 and enqueues one delivery per outgoing
    synapse at cycle + 1 + axon_delay.  Charges of non-firing neurons
    persist; there is no leak.

    ev_cycles/ev_neurons hold this window's input spikes (cycles relative
    to start_cycle, sorted ascending) in the half-open range [ev_lo, ev_hi).
    pending counts outstanding ring entries so the loop can stop early once
    nothing can change.  Only neurons touched this cycle are checked for
    firing: every other charge was already at or below threshold.
    """
    z = 0
    ptr = ev_lo
    for rel in range(tau):
        if pending == 0 and ptr >= ev_hi:
            break
        cyc = start_cycle + rel
        slot = cyc % RING
        n_touched = 0
        if ring_events[slot] != 0:
            pending -= ring_events[slot]
            ring_events[slot] = 0
            for i in range(charge.shape[0]):
                w = ring[slot, i]
                if w != 0:
                    ring[slot, i] = 0
                    charge[i] += w
                    if not is_touched[i]:
                        is_touched[i] = True
                        touched[n_touched] = i
                        n_touched += 1
        while ptr < ev_hi and ev_cycles[ptr] == rel:
            i = ev_neurons[ptr]
            charge[i] += 1
            if not is_touched[i]:
                is_touched[i] = True
                touched[n_touched] = i
                n_touched += 1
            ptr += 1
        for k in range(n_touched):
            i = touched[k]
            is_touched[i] = False
            q = charge[i]
            if q > CHARGE_MAX:
                q = CHARGE_MAX
                charge[i] = q
            elif q < CHARGE_MIN:
                q = CHARGE_MIN
                charge[i] = q
            if q > thresholds[i]:
                charge[i] = 0
                if i == out_idx:
                    z += 1
                if record:
                    raster_neuron[raster_n] = i
                    raster_cycle[raster_n] = rel
                    raster_n += 1
                deg = syn_start[i + 1] - syn_start[i]
                if deg != 0:
                    tslot = (cyc + hop[i]) % RING
                    for s in range(syn_start[i], syn_start[i + 1]):
                        ring[tslot, syn_post[s]] += syn_weight[s]
                    ring_events[tslot] += deg
                    pending += deg
    return z, raster_n, pending


@njit(cache=True, nogil=True)
def run_steps(charge, ring, ring_events, start_cycle, tau,
              ev_offsets, ev_cycles, ev_neurons,
              thresholds, hop, syn_start, syn_post, syn_weight,
              out_idx, z_out):
    """Simulate one tau-cycle window per step, carrying state across steps.

    ev_offsets[t]:ev_offsets[t+1] slices this step's input spikes out of
    ev_cycles/ev_neurons.  Output spike counts land in z_out.  Returns the
    cycle counter after the last window.
    """
    n = charge.shape[0]
    pending = 0
    for s in range(RING):
        pending += ring_events[s]
    touched = np.empty(n, np.int64)
    is_touched = np.zeros(n, np.bool_)
    no_raster = np.empty(0, np.int64)
    cyc = start_cycle
    for t in range(z_out.shape[0]):
        z, _, pending = advance_window(
            charge, ring, ring_events, pending, cyc, tau,
            ev_cycles, ev_neurons, ev_offsets[t], ev_offsets[t + 1],
            thresholds, hop, syn_start, syn_post, syn_weight,
            out_idx, touched, is_touched,
            False, no_raster, no_raster, 0)
        z_out[t] = z
        cyc += tau
    return cyc
