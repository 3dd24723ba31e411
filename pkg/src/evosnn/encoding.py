"""Spike encoders turning observation vectors into per-input spike trains.

Each variable is normalized against its recorded range and converted to a
spike count k = round(xn * tau), half away from zero.  The ``rate`` scheme
spreads the k spikes evenly over the window; the ``spikes`` scheme packs
them at the start.  With b bins per variable the variable's range is split
into b subranges, each feeding its own input neuron with a bin-local
normalized amplitude (clamped, so bins saturate rather than one-hot); the
flip-flop option inverts the amplitude on even-indexed bins so their
firing peaks at the subrange minimum.  Input neurons are ordered
variable-major: all bins of variable 0, then variable 1, and so on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

RATE = "rate"
SPIKES = "spikes"
SCHEMES = (RATE, SPIKES)

SpikeTrain = list[list[int]]


@dataclass(frozen=True)
class VariableRange:
    min: float
    max: float

    def __post_init__(self):
        if not (math.isfinite(self.min) and math.isfinite(self.max)):
            raise ValueError("variable range must be finite")
        if not self.max > self.min:
            raise ValueError(f"variable range needs max > min, got [{self.min}, {self.max}]")


@dataclass(frozen=True)
class EncoderSpec:
    scheme: str
    tau: int
    bins_per_variable: int = 1
    flip_flop: bool = False
    ranges: tuple[VariableRange, ...] = ()

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown encoding scheme {self.scheme!r}")
        if self.tau < 1:
            raise ValueError("tau must be >= 1")
        if self.bins_per_variable < 1:
            raise ValueError("bins_per_variable must be >= 1")
        object.__setattr__(self, "ranges", tuple(self.ranges))

    @property
    def n_variables(self) -> int:
        return len(self.ranges)

    @property
    def n_inputs(self) -> int:
        return len(self.ranges) * self.bins_per_variable


def normalize(x: float, rng: VariableRange) -> float:
    """Map x into [0, 1] over the range, clamping values outside it."""
    if not math.isfinite(x):
        raise ValueError(f"cannot normalize non-finite value {x!r}")
    xn = (x - rng.min) / (rng.max - rng.min)
    return min(1.0, max(0.0, xn))


def spike_count(xn: float, tau: int) -> int:
    """Amplitude to spike count: round(xn * tau), half away from zero."""
    return math.floor(xn * tau + 0.5)


def encode_rate(xn: float, tau: int) -> list[int]:
    """k = round(xn * tau) spikes spread evenly: cycle_j = floor(j * tau / k)."""
    k = spike_count(xn, tau)
    return [j * tau // k for j in range(k)]


def encode_spikes(xn: float, tau: int) -> list[int]:
    """k = round(xn * tau) spikes packed at cycles 0..k-1."""
    k = spike_count(xn, tau)
    return list(range(k))


_SCHEMES = {RATE: encode_rate, SPIKES: encode_spikes}


def bin_amplitude(x: float, rng: VariableRange, bin_index: int,
                  bins: int, flip_flop: bool) -> float:
    """Bin-local normalized amplitude of x for one bin of a variable."""
    if not math.isfinite(x):
        raise ValueError(f"cannot normalize non-finite value {x!r}")
    width = (rng.max - rng.min) / bins
    lo = rng.min + bin_index * width
    xn = (x - lo) / width
    xn = min(1.0, max(0.0, xn))
    if flip_flop and bin_index % 2 == 0:
        xn = 1.0 - xn
    return xn


def encode_observation(x, spec: EncoderSpec) -> SpikeTrain:
    """Encode one observation vector into spec.n_inputs spike trains."""
    if len(x) != spec.n_variables:
        raise ValueError(
            f"observation has {len(x)} variables, encoder expects {spec.n_variables}")
    encode = _SCHEMES[spec.scheme]
    trains: SpikeTrain = []
    for value, rng in zip(x, spec.ranges):
        for b in range(spec.bins_per_variable):
            xn = bin_amplitude(value, rng, b, spec.bins_per_variable,
                               spec.flip_flop)
            trains.append(encode(xn, spec.tau))
    return trains


@dataclass
class EncodedRun:
    """A whole run's input spikes flattened for the simulator's batch path.

    positions holds input-neuron positions (variable-major, matching a
    network's input_order); cycles are window-relative; step t owns the
    slice offsets[t]:offsets[t+1], sorted by cycle within each step.
    """

    offsets: np.ndarray
    cycles: np.ndarray
    positions: np.ndarray
    tau: int = field(default=0)

    @property
    def n_steps(self) -> int:
        return self.offsets.shape[0] - 1


def encode_run(observations: np.ndarray, spec: EncoderSpec) -> EncodedRun:
    """Encode a T x n observation matrix into one EncodedRun."""
    observations = np.asarray(observations, dtype=np.float64)
    if observations.ndim != 2:
        raise ValueError("observations must be a T x n matrix")
    n_steps = observations.shape[0]
    offsets = np.zeros(n_steps + 1, np.int64)
    all_cycles: list[int] = []
    all_positions: list[int] = []
    for t in range(n_steps):
        trains = encode_observation(observations[t], spec)
        events = sorted(
            (c, pos) for pos, train in enumerate(trains) for c in train)
        for c, pos in events:
            all_cycles.append(c)
            all_positions.append(pos)
        offsets[t + 1] = len(all_cycles)
    return EncodedRun(offsets=offsets,
                      cycles=np.array(all_cycles, np.int64),
                      positions=np.array(all_positions, np.int64),
                      tau=spec.tau)
