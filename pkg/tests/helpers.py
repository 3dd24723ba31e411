"""Shared builders for random test networks and spike trains."""

import numpy as np

from evosnn.network import HIDDEN, INPUT, OUTPUT, Network, Neuron, Synapse


def relay(nid):
    return Neuron(id=nid, threshold=0, axon_delay=0, kind=INPUT)


def tiny_net(weight=1, threshold_out=0, delay_in=0, delay_out=0):
    """One input relaying to one output through a single synapse."""
    return Network(
        neurons=[Neuron(0, 0, delay_in, INPUT),
                 Neuron(1, threshold_out, delay_out, OUTPUT)],
        synapses=[Synapse(0, 1, weight)],
        input_order=[0], output=1)


def random_network(rng, n_inputs=2, n_hidden=6, n_synapses=24):
    """A valid random network with contiguous ids and unique synapses."""
    total = n_inputs + 1 + n_hidden
    neurons = [relay(i) for i in range(n_inputs)]
    neurons.append(Neuron(n_inputs, int(rng.integers(0, 256)),
                          int(rng.integers(0, 16)), OUTPUT))
    for i in range(n_inputs + 1, total):
        neurons.append(Neuron(i, int(rng.integers(0, 256)),
                              int(rng.integers(0, 16)), HIDDEN))
    n_synapses = min(n_synapses, total * total)
    pairs = rng.choice(total * total, size=n_synapses, replace=False)
    synapses = [Synapse(int(p // total), int(p % total),
                        int(rng.integers(-128, 128))) for p in pairs]
    return Network(neurons=neurons, synapses=synapses,
                   input_order=list(range(n_inputs)), output=n_inputs)


def random_spikes(rng, n_inputs, tau, density=0.3):
    """Per-input sorted unique spike cycles with roughly density * tau spikes."""
    spikes = []
    for _ in range(n_inputs):
        mask = rng.random(tau) < density
        spikes.append([int(c) for c in np.flatnonzero(mask)])
    return spikes
