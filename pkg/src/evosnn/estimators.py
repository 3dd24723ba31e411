"""scikit-learn style facades over the functional pipeline.

The functional modules stay the source of truth; these classes adapt
them to the fit/transform/predict idiom so the toolkit drops into
sklearn-shaped experiment harnesses.  Labels ride inside Run objects
(step-wise classification has one label per step, not per sample), so
fit takes runs or a Dataset and ignores the y argument.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import metrics
from .encoding import EncoderSpec, VariableRange, encode_observation
from .evolution import EonsParams, TrainConfig, train
from .inference import ClassifierConfig, Dataset, Run, classify_dataset


def check_observation_matrix(X) -> np.ndarray:
    """Coerce to a finite, non-empty float64 matrix of shape (T, n)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise ValueError("expected a non-empty 2-D observation matrix")
    if not np.isfinite(X).all():
        raise ValueError("observations must be finite")
    return X


def as_runs(X) -> list[Run]:
    """Accept a Dataset, a Run, or an iterable of Runs."""
    if isinstance(X, Dataset):
        runs = list(X.runs)
    elif isinstance(X, Run):
        runs = [X]
    else:
        runs = list(X)
    if not runs:
        raise ValueError("no runs given")
    for r in runs:
        if not isinstance(r, Run):
            raise TypeError(f"expected Run, got {type(r).__name__}")
    widths = {r.n_variables for r in runs}
    if len(widths) != 1:
        raise ValueError(f"runs disagree on variable count: {sorted(widths)}")
    return runs


def ranges_from_runs(runs) -> tuple[VariableRange, ...]:
    """Per-variable min/max over all runs; degenerate columns get width 1."""
    lo = np.min([r.observations.min(axis=0) for r in runs], axis=0)
    hi = np.max([r.observations.max(axis=0) for r in runs], axis=0)
    out = []
    for a, b in zip(lo, hi):
        if b <= a:
            b = a + 1.0
        out.append(VariableRange(float(a), float(b)))
    return tuple(out)


def as_dataset(X) -> Dataset:
    if isinstance(X, Dataset):
        return X
    runs = as_runs(X)
    return Dataset(runs=runs, ranges=ranges_from_runs(runs),
                   stride_seconds=runs[0].stride_seconds)


class SpikeEncoder(TransformerMixin, BaseEstimator):
    """Fit per-variable ranges, transform observation rows to spike trains.

    transform returns one spike train per row: a list of per-input-neuron
    lists of spike cycles, ready for the simulator.
    """

    def __init__(self, scheme: str = "rate", tau: int = 16,
                 bins_per_variable: int = 1, flip_flop: bool = False):
        self.scheme = scheme
        self.tau = tau
        self.bins_per_variable = bins_per_variable
        self.flip_flop = flip_flop

    def fit(self, X, y=None):
        X = check_observation_matrix(X)
        ranges = ranges_from_runs(
            [Run(observations=X, labels=np.zeros(X.shape[0], dtype=np.int8),
                 stride_seconds=1.0)])
        self.spec_ = EncoderSpec(scheme=self.scheme, tau=self.tau,
                                 bins_per_variable=self.bins_per_variable,
                                 flip_flop=self.flip_flop, ranges=ranges)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "spec_")
        X = check_observation_matrix(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, encoder was fitted with "
                f"{self.n_features_in_}")
        return [encode_observation(row, self.spec_) for row in X]


class SnnStepClassifier(BaseEstimator):
    """Evolve a network on labeled runs, then predict per-step labels.

    predict returns one binary array per run (runs may differ in length).
    theta="auto" sweeps the spike-count threshold for best training MCC;
    an integer fixes it.  window is the rolling-sum width in steps.
    """

    def __init__(self, epochs: int = 20, population_size: int = 100,
                 tau: int = 16, scheme: str = "rate",
                 bins_per_variable: int = 1, flip_flop: bool = False,
                 fitness: str = "mcc", batch_fraction: float = 1.0,
                 theta: int | str = "auto", window: int = 0,
                 mode: str = "sample", seed: int = 0, jobs: int = 1):
        self.epochs = epochs
        self.population_size = population_size
        self.tau = tau
        self.scheme = scheme
        self.bins_per_variable = bins_per_variable
        self.flip_flop = flip_flop
        self.fitness = fitness
        self.batch_fraction = batch_fraction
        self.theta = theta
        self.window = window
        self.mode = mode
        self.seed = seed
        self.jobs = jobs

    def fit(self, X, y=None):
        dataset = as_dataset(X)
        if self.theta != "auto" and int(self.theta) < 0:
            raise ValueError("theta must be 'auto' or a non-negative integer")
        params = EonsParams(population_size=self.population_size)
        cfg = TrainConfig(epochs=self.epochs, tau=self.tau,
                          fitness=self.fitness, seed=self.seed,
                          batch_fraction=self.batch_fraction, mode=self.mode)
        spec = EncoderSpec(scheme=self.scheme, tau=self.tau,
                           bins_per_variable=self.bins_per_variable,
                           flip_flop=self.flip_flop, ranges=dataset.ranges)
        result = train(dataset, params, cfg, encoder=spec, jobs=self.jobs)
        self.result_ = result
        self.network_ = result.best.network
        self.encoder_spec_ = spec
        self.history_ = result.history
        self.n_features_in_ = dataset.n_variables
        if self.theta == "auto":
            traces = classify_dataset(self.network_, spec, dataset.runs,
                                      jobs=self.jobs)
            labels = [r.labels for r in dataset.runs]
            theta, _ = metrics.best_mcc_threshold(traces, labels,
                                                  mode=self.mode,
                                                  window=self.window)
            self.theta_ = theta
        else:
            self.theta_ = int(self.theta)
        self.config_ = ClassifierConfig(theta=self.theta_, window=self.window)
        return self

    def _traces(self, X):
        check_is_fitted(self, "network_")
        runs = as_runs(X)
        return runs, classify_dataset(self.network_, self.encoder_spec_, runs,
                                      cfg=self.config_, jobs=self.jobs)

    def predict(self, X) -> list[np.ndarray]:
        runs, traces = self._traces(X)
        return [t.y for t in traces]

    def decision_function(self, X) -> list[np.ndarray]:
        """Raw per-step output spike counts, one array per run."""
        runs, traces = self._traces(X)
        return [t.z for t in traces]

    def score(self, X, y=None) -> float:
        """MCC of the fitted prediction rule over the given runs."""
        runs, traces = self._traces(X)
        cm = metrics.confusion([t.y for t in traces],
                               [r.labels for r in runs], self.mode)
        return metrics.mcc(cm)
