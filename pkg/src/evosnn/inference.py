"""Step-wise classification of labeled runs with carried simulator state.

A run is processed one observation at a time: each observation is encoded
into spike trains, the network runs for tau cycles, and the output
neuron's spike count z_t is thresholded into the prediction y_t.  The
simulator state is reset at the start of every run and then carried
across all of the run's windows, so charges and in-flight spikes provide
temporal context between steps.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import metrics, simulator
from .encoding import EncodedRun, EncoderSpec, VariableRange, encode_run
from .network import Network
from .simulator import CompiledNetwork


@dataclass(eq=False)
class Run:
    """One labeled multivariate time series recording."""

    observations: np.ndarray
    labels: np.ndarray
    stride_seconds: float
    id: str = ""
    snr: float | None = None

    def __post_init__(self):
        self.observations = np.asarray(self.observations, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int8)
        if self.observations.ndim != 2:
            raise ValueError("observations must be a T x n matrix")
        if self.labels.shape != (self.observations.shape[0],):
            raise ValueError("labels must have one entry per step")
        if not np.isin(self.labels, (0, 1)).all():
            raise ValueError("labels must be 0 or 1")
        if not self.stride_seconds > 0:
            raise ValueError("stride_seconds must be positive")

    @property
    def n_steps(self) -> int:
        return self.observations.shape[0]

    @property
    def n_variables(self) -> int:
        return self.observations.shape[1]


@dataclass(eq=False)
class Dataset:
    """Runs plus the per-variable ranges their encoders normalize against."""

    runs: list[Run]
    ranges: tuple[VariableRange, ...]
    stride_seconds: float

    def __post_init__(self):
        self.ranges = tuple(self.ranges)

    @property
    def n_variables(self) -> int:
        return len(self.ranges)


@dataclass(frozen=True)
class ClassifierConfig:
    """Prediction rule y_t = [rolling_sum(z, window)_t > theta].

    window is in steps; 0 disables the rolling sum (y_t = [z_t > theta]).
    """

    theta: int = 0
    window: int = 0

    def __post_init__(self):
        if self.theta < 0:
            raise ValueError("theta must be non-negative")
        if self.window < 0:
            raise ValueError("window must be non-negative")


@dataclass(eq=False)
class StepTrace:
    """Per-step output spike counts and thresholded predictions for one run."""

    z: np.ndarray
    y: np.ndarray
    run_id: str = ""


def window_steps(window_seconds: float, stride_seconds: float) -> int:
    """Convert a rolling window from seconds to whole steps."""
    if window_seconds <= 0:
        return 0
    return max(1, round(window_seconds / stride_seconds))


def apply_threshold(z: np.ndarray, cfg: ClassifierConfig) -> np.ndarray:
    summed = metrics.rolling_sum(np.asarray(z), cfg.window)
    return (summed > cfg.theta).astype(np.int8)


def classify_run(network: Network | CompiledNetwork, spec: EncoderSpec,
                 run: Run, cfg: ClassifierConfig | None = None,
                 encoded: EncodedRun | None = None) -> StepTrace:
    """Classify one run step-by-step from a fresh simulator state.

    ``encoded`` short-circuits spike encoding when the caller has already
    encoded the run with the same spec (the training loop caches these).
    """
    cfg = cfg or ClassifierConfig()
    compiled = simulator._as_compiled(network)
    if run.n_variables != spec.n_variables:
        raise ValueError(
            f"run has {run.n_variables} variables, encoder expects {spec.n_variables}")
    if compiled.n_inputs != spec.n_inputs:
        raise ValueError(
            f"network has {compiled.n_inputs} inputs, encoder produces {spec.n_inputs}")
    if encoded is None:
        encoded = encode_run(run.observations, spec)
    state = compiled.new_state()
    ev_neurons = (compiled.input_idx[encoded.positions]
                  if encoded.positions.size else encoded.positions)
    z = simulator.run_encoded_steps(compiled, state, encoded.offsets,
                                    encoded.cycles, ev_neurons, spec.tau)
    return StepTrace(z=z, y=apply_threshold(z, cfg), run_id=run.id)


def classify_dataset(network: Network | CompiledNetwork, spec: EncoderSpec,
                     runs, cfg: ClassifierConfig | None = None,
                     jobs: int = 1) -> list[StepTrace]:
    """Map classify_run over runs, order-preserving; each run gets a fresh state."""
    compiled = simulator._as_compiled(network)
    if jobs > 1 and len(runs) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(
                lambda run: classify_run(compiled, spec, run, cfg), runs))
    return [classify_run(compiled, spec, run, cfg) for run in runs]
