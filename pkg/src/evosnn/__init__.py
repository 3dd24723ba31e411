"""evosnn: evolves compact quantized spiking networks for step-wise
binary classification of multivariate time series, with a bit-faithful
simulator of the target neuromorphic core."""

__version__ = "0.1.0"

from .datagen import build_dataset
from .encoding import EncoderSpec, VariableRange
from .ensemble import Ensemble, EnsembleMember, calibrate_far
from .evolution import EonsParams, TrainConfig, train
from .inference import (ClassifierConfig, Dataset, Run, StepTrace,
                        classify_dataset, classify_run)
from .network import Network, Neuron, Synapse, validate
from .persistence import FormatError, load_network, save_network

__all__ = [
    "ClassifierConfig", "Dataset", "EncoderSpec", "Ensemble",
    "EnsembleMember", "EonsParams", "FormatError", "Network", "Neuron",
    "Run", "StepTrace", "Synapse", "TrainConfig", "VariableRange",
    "build_dataset", "calibrate_far", "classify_dataset", "classify_run",
    "load_network", "save_network", "train", "validate", "__version__",
]
