"""Exactly simulated variational quantum circuits for seismic velocity inversion."""

from .ansatz import AnsatzConfig, build_ansatz, init_params
from .errors import (ConfigurationError, DataError, FormatError, NumericError, QuGeoError,
                     StabilityError)
from .qsim import Circuit, GateOp, Statevector, run_circuit, value_and_grad
from .train import Checkpoint, TrainConfig, evaluate, predict, train

__version__ = "0.1.0"

__all__ = [
    "AnsatzConfig", "build_ansatz", "init_params",
    "ConfigurationError", "DataError", "FormatError", "NumericError", "QuGeoError",
    "StabilityError",
    "Circuit", "GateOp", "Statevector", "run_circuit", "value_and_grad",
    "Checkpoint", "TrainConfig", "evaluate", "predict", "train",
]
