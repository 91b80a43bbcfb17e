"""Gradient-free network training with a particle filter over the weights."""

from .model import (
    PAPER_Q,
    PAPER_R,
    EstimationError,
    InvalidArgumentError,
    InvalidStateError,
    MeasurementModel,
    NoiseSpec,
    TrainingExample,
    mean_squared_error,
    propagate,
    residual,
)

__version__ = "0.1.0"

__all__ = [
    "PAPER_Q",
    "PAPER_R",
    "EstimationError",
    "InvalidArgumentError",
    "InvalidStateError",
    "MeasurementModel",
    "NoiseSpec",
    "TrainingExample",
    "mean_squared_error",
    "propagate",
    "residual",
    "__version__",
]
