"""Bit-faithful simulator of the quantized integrate-and-fire core.

Cycle semantics, in order, for cycle c:

1. every in-flight delivery due at c and every input spike scheduled at c
   (value +1) is added to its target's charge; the per-neuron total for the
   cycle saturates once at the signed 16-bit range
2. every neuron whose charge strictly exceeds its threshold fires, resets
   its charge to 0, and enqueues one delivery per outgoing synapse due at
   cycle c + 1 + axon_delay(pre)
3. the cycle counter advances

Charges of non-firing neurons persist with no leak, and in-flight
deliveries survive window boundaries, so carried state is temporal context
for the next window.  Everything is integer arithmetic; two runs from equal
state are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .network import Network, check_valid

RING = _kernels.RING


@dataclass
class CompiledNetwork:
    """A validated network flattened to arrays for the simulator.

    Neurons are densely indexed in id order; ids[i] recovers the neuron id
    of dense index i.  Outgoing synapses are stored CSR-style: the synapses
    of dense neuron i occupy syn_post/syn_weight[syn_start[i]:syn_start[i+1]].
    hop[i] is 1 + axon_delay, the cycle offset from fire to delivery.
    """

    ids: np.ndarray
    index: dict[int, int]
    thresholds: np.ndarray
    hop: np.ndarray
    syn_start: np.ndarray
    syn_post: np.ndarray
    syn_weight: np.ndarray
    input_idx: np.ndarray
    out_idx: int

    @property
    def n_neurons(self) -> int:
        return self.ids.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.input_idx.shape[0]

    def new_state(self) -> "SimulatorState":
        return SimulatorState(self.n_neurons)


@dataclass
class SimulatorState:
    """Charges plus in-flight deliveries, carried between windows.

    ring[slot, i] holds the summed weight due for dense neuron i at the
    cycle congruent to slot modulo RING; ring_events[slot] counts the
    enqueue operations backing that slot so the kernel knows when nothing
    is pending.  cycle is the global cycle counter.
    """

    n_neurons: int
    charge: np.ndarray = field(init=False)
    ring: np.ndarray = field(init=False)
    ring_events: np.ndarray = field(init=False)
    cycle: int = field(init=False, default=0)

    def __post_init__(self):
        self.charge = np.zeros(self.n_neurons, np.int64)
        self.ring = np.zeros((RING, self.n_neurons), np.int64)
        self.ring_events = np.zeros(RING, np.int64)

    def reset(self) -> "SimulatorState":
        """Zero charges, drop in-flight deliveries, rewind the cycle counter."""
        self.charge[:] = 0
        self.ring[:] = 0
        self.ring_events[:] = 0
        self.cycle = 0
        return self

    def copy(self) -> "SimulatorState":
        dup = SimulatorState(self.n_neurons)
        dup.charge[:] = self.charge
        dup.ring[:] = self.ring
        dup.ring_events[:] = self.ring_events
        dup.cycle = self.cycle
        return dup

    def inflight(self) -> list[tuple[int, int, int]]:
        """Pending deliveries as (delivery_cycle, dense_neuron_index, summed_weight).

        Delivery cycles are reconstructed from the current cycle counter;
        entries are sorted and aggregated per (cycle, target).
        """
        out = []
        for ahead in range(RING):
            cyc = self.cycle + ahead
            slot = cyc % RING
            for i in np.nonzero(self.ring[slot])[0]:
                out.append((cyc, int(i), int(self.ring[slot, i])))
        return out


@dataclass
class SpikeRaster:
    """Fired cycles per neuron id within one window."""

    fired: dict[int, list[int]]

    def cycles(self, neuron_id: int) -> list[int]:
        return self.fired.get(neuron_id, [])


def compile_network(net: Network) -> CompiledNetwork:
    """Validate a network and flatten it for simulation."""
    check_valid(net)
    ids = np.array([n.id for n in net.neurons], np.int64)
    index = {n.id: i for i, n in enumerate(net.neurons)}
    thresholds = np.array([n.threshold for n in net.neurons], np.int64)
    hop = np.array([1 + n.axon_delay for n in net.neurons], np.int64)

    n = len(net.neurons)
    counts = np.zeros(n + 1, np.int64)
    for s in net.synapses:
        counts[index[s.pre] + 1] += 1
    syn_start = np.cumsum(counts)
    syn_post = np.empty(len(net.synapses), np.int64)
    syn_weight = np.empty(len(net.synapses), np.int64)
    cursor = syn_start[:-1].copy()
    for s in net.synapses:
        i = index[s.pre]
        syn_post[cursor[i]] = index[s.post]
        syn_weight[cursor[i]] = s.weight
        cursor[i] += 1

    input_idx = np.array([index[i] for i in net.input_order], np.int64)
    return CompiledNetwork(ids=ids, index=index, thresholds=thresholds,
                           hop=hop, syn_start=syn_start, syn_post=syn_post,
                           syn_weight=syn_weight, input_idx=input_idx,
                           out_idx=index[net.output])


def _as_compiled(net: Network | CompiledNetwork) -> CompiledNetwork:
    if isinstance(net, CompiledNetwork):
        return net
    return compile_network(net)


def _flatten_spikes(spikes, n_inputs: int, tau: int):
    """Flatten per-input cycle lists to (cycles, positions) sorted by cycle."""
    if len(spikes) != n_inputs:
        raise ValueError(
            f"expected spike trains for {n_inputs} inputs, got {len(spikes)}")
    cycles: list[int] = []
    positions: list[int] = []
    for pos, train in enumerate(spikes):
        prev = -1
        for c in train:
            c = int(c)
            if c <= prev:
                raise ValueError(
                    f"spike cycles for input {pos} must be strictly increasing")
            prev = c
            if not (0 <= c < tau):
                raise ValueError(
                    f"input spike cycle {c} outside window of {tau} cycles")
            cycles.append(c)
            positions.append(pos)
    cyc = np.array(cycles, np.int64)
    pos = np.array(positions, np.int64)
    order = np.argsort(cyc, kind="stable")
    return cyc[order], pos[order]


def run_window(net: Network | CompiledNetwork, state: SimulatorState,
               spikes, tau: int) -> tuple[int, SpikeRaster, SimulatorState]:
    """Run one window of tau cycles, recording every fire.

    spikes is one cycle list per declared input, window-relative, sorted
    strictly ascending, all cycles < tau.  Returns the output neuron's
    spike count, the raster of all fires (cycles window-relative), and the
    advanced state.
    """
    compiled = _as_compiled(net)
    if state.n_neurons != compiled.n_neurons:
        raise ValueError("state size does not match network")
    tau = int(tau)
    if tau < 0:
        raise ValueError("tau must be non-negative")
    ev_cycles, ev_pos = _flatten_spikes(spikes, compiled.n_inputs, tau)
    ev_neurons = compiled.input_idx[ev_pos] if ev_pos.size else ev_pos

    n = compiled.n_neurons
    touched = np.empty(n, np.int64)
    is_touched = np.zeros(n, np.bool_)
    cap = max(1, n * tau)
    raster_neuron = np.empty(cap, np.int64)
    raster_cycle = np.empty(cap, np.int64)
    pending = int(state.ring_events.sum())

    z, n_fires, _ = _kernels.advance_window(
        state.charge, state.ring, state.ring_events, pending,
        state.cycle, tau, ev_cycles, ev_neurons, 0, ev_cycles.shape[0],
        compiled.thresholds, compiled.hop, compiled.syn_start,
        compiled.syn_post, compiled.syn_weight, compiled.out_idx,
        touched, is_touched, True, raster_neuron, raster_cycle, 0)
    state.cycle += tau

    fired: dict[int, list[int]] = {}
    for k in range(n_fires):
        nid = int(compiled.ids[raster_neuron[k]])
        fired.setdefault(nid, []).append(int(raster_cycle[k]))
    return int(z), SpikeRaster(fired), state


def run_encoded_steps(compiled: CompiledNetwork, state: SimulatorState,
                      ev_offsets: np.ndarray, ev_cycles: np.ndarray,
                      ev_neurons: np.ndarray, tau: int) -> np.ndarray:
    """Run many consecutive windows from pre-flattened input spikes.

    This is the throughput path used by inference and training; semantics
    match a run_window call per step with the same carried state.
    """
    n_steps = ev_offsets.shape[0] - 1
    z = np.zeros(n_steps, np.int64)
    state.cycle = _kernels.run_steps(
        state.charge, state.ring, state.ring_events, state.cycle, tau,
        ev_offsets, ev_cycles, ev_neurons,
        compiled.thresholds, compiled.hop, compiled.syn_start,
        compiled.syn_post, compiled.syn_weight, compiled.out_idx, z)
    return z
