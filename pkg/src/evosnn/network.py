"""Network genome for a small quantized neuromorphic core.

A network is a directed graph of integrate-and-fire neurons with 8-bit
thresholds, 4-bit axon delays and 8-bit signed synapse weights.  The core
holds at most 256 neurons and 4096 synapses, with at most one synapse per
ordered (pre, post) pair.  Self-loops and recurrent cycles are allowed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

MAX_NEURONS = 256
MAX_SYNAPSES = 4096

THRESHOLD_MIN = 0
THRESHOLD_MAX = 255
DELAY_MIN = 0
DELAY_MAX = 15
WEIGHT_MIN = -128
WEIGHT_MAX = 127
CHARGE_MIN = -32768
CHARGE_MAX = 32767

INPUT = "input"
HIDDEN = "hidden"
OUTPUT = "output"
NEURON_KINDS = (INPUT, HIDDEN, OUTPUT)


class InvalidNetworkError(ValueError):
    """Raised when a network violates the hardware envelope."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass(frozen=True)
class Neuron:
    id: int
    threshold: int
    axon_delay: int
    kind: str


@dataclass(frozen=True)
class Synapse:
    pre: int
    post: int
    weight: int


@dataclass(eq=False)
class Network:
    """A neuron/synapse graph plus its input/output designation.

    Instances are normalized on construction (neurons sorted by id,
    synapses by (pre, post)) so that two semantically equal networks
    compare and serialize identically.  Treat instances as immutable;
    the evolutionary operators always build fresh networks.
    """

    neurons: list[Neuron]
    synapses: list[Synapse]
    input_order: list[int]
    output: int
    _by_id: dict[int, Neuron] = field(init=False, repr=False)

    def __post_init__(self):
        self.neurons = sorted(self.neurons, key=lambda n: n.id)
        self.synapses = sorted(self.synapses, key=lambda s: (s.pre, s.post))
        self.input_order = [int(i) for i in self.input_order]
        self._by_id = {n.id: n for n in self.neurons}

    def neuron(self, neuron_id: int) -> Neuron:
        return self._by_id[neuron_id]

    def has_neuron(self, neuron_id: int) -> bool:
        return neuron_id in self._by_id

    @property
    def n_neurons(self) -> int:
        return len(self.neurons)

    @property
    def n_synapses(self) -> int:
        return len(self.synapses)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Network):
            return NotImplemented
        return (
            self.neurons == other.neurons
            and self.synapses == other.synapses
            and self.input_order == other.input_order
            and self.output == other.output
        )


def validate(net: Network) -> list[str]:
    """Check a network against the hardware envelope.

    Returns every violation found, as human-readable strings; an empty
    list means the network is deployable.
    """
    out: list[str] = []

    if net.n_neurons > MAX_NEURONS:
        out.append(f"neuron cap exceeded: {net.n_neurons} > {MAX_NEURONS}")
    if net.n_synapses > MAX_SYNAPSES:
        out.append(f"synapse cap exceeded: {net.n_synapses} > {MAX_SYNAPSES}")

    seen_ids: set[int] = set()
    for n in net.neurons:
        if n.id in seen_ids:
            out.append(f"duplicate neuron id {n.id}")
        seen_ids.add(n.id)
        if not (0 <= n.id < MAX_NEURONS):
            out.append(f"neuron id out of range: {n.id}")
        if not (THRESHOLD_MIN <= n.threshold <= THRESHOLD_MAX):
            out.append(f"threshold out of range on neuron {n.id}: {n.threshold}")
        if not (DELAY_MIN <= n.axon_delay <= DELAY_MAX):
            out.append(f"axon delay out of range on neuron {n.id}: {n.axon_delay}")
        if n.kind not in NEURON_KINDS:
            out.append(f"unknown neuron kind on neuron {n.id}: {n.kind!r}")

    seen_pairs: set[tuple[int, int]] = set()
    for s in net.synapses:
        pair = (s.pre, s.post)
        if pair in seen_pairs:
            out.append(f"multi-edge: {pair}")
        seen_pairs.add(pair)
        if s.pre not in seen_ids:
            out.append(f"synapse {pair} references missing neuron {s.pre}")
        if s.post not in seen_ids:
            out.append(f"synapse {pair} references missing neuron {s.post}")
        if not (WEIGHT_MIN <= s.weight <= WEIGHT_MAX):
            out.append(f"weight out of range on synapse {pair}: {s.weight}")

    declared = set(net.input_order)
    if len(declared) != len(net.input_order):
        out.append("input_order contains duplicates")
    for i in net.input_order:
        if i not in seen_ids:
            out.append(f"input_order references missing neuron {i}")
        elif net.neuron(i).kind != INPUT:
            out.append(f"declared input {i} has kind {net.neuron(i).kind!r}")
    for n in net.neurons:
        if n.kind == INPUT and n.id not in declared:
            out.append(f"neuron {n.id} has kind input but is not in input_order")

    if net.output not in seen_ids:
        out.append(f"output references missing neuron {net.output}")
    else:
        out_kind = net.neuron(net.output).kind
        # The designated output is normally a dedicated output neuron; the
        # degenerate single-neuron network where one input doubles as the
        # output is also legal.
        if out_kind == OUTPUT:
            pass
        elif out_kind == INPUT and net.output in declared:
            pass
        else:
            out.append(f"output neuron {net.output} has kind {out_kind!r}")
    for n in net.neurons:
        if n.kind == OUTPUT and n.id != net.output:
            out.append(f"neuron {n.id} has kind output but is not the output")

    return out


def check_valid(net: Network) -> Network:
    """Raise InvalidNetworkError unless ``net`` passes validate()."""
    violations = validate(net)
    if violations:
        raise InvalidNetworkError(violations)
    return net
