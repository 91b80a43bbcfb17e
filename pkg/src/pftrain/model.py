"""State-space formulation of network training.

The weights ``x`` are treated as the state of a random walk

    x(t+1) = x(t) + w(t),    w ~ N(0, q I)

observed through a scalar measurement

    y(t) = g(x(t), u(t)) + v(t),    v ~ N(0, r)

where ``g`` is the network. Everything here is a pure function of its
arguments; randomness is always supplied by the caller.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

Array = np.ndarray

#: Process-noise intensity used for the Henon experiment (0.5 * sqrt(0.016)),
#: read as a per-step variance.
PAPER_Q = 0.5 * math.sqrt(0.016)
#: Measurement-noise variance used for the Henon experiment.
PAPER_R = 0.2


class InvalidArgumentError(ValueError):
    """Raised when an argument has the wrong shape or an out-of-range value."""


class InvalidStateError(RuntimeError):
    """Raised when a filter state becomes non-finite."""


def as_vector(values, length: int | None = None, name: str = "vector") -> Array:
    """Return ``values`` as a finite 1-D float array, optionally of fixed length."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise InvalidArgumentError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if length is not None and arr.shape[0] != length:
        raise InvalidArgumentError(f"{name} must have length {length}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class NoiseSpec:
    """Process intensity ``q`` (variance per weight per step) and measurement variance ``r``."""

    q: float = PAPER_Q
    r: float = PAPER_R

    def __post_init__(self):
        if not (math.isfinite(self.q) and self.q >= 0.0):
            raise InvalidArgumentError(f"q must be finite and >= 0, got {self.q}")
        if not (math.isfinite(self.r) and self.r > 0.0):
            raise InvalidArgumentError(f"r must be finite and > 0, got {self.r}")


@dataclass(frozen=True)
class TrainingExample:
    """One input pattern ``u(t)`` with its observed scalar output ``y(t)``."""

    input: Array
    output: float

    def __post_init__(self):
        object.__setattr__(self, "input", as_vector(self.input, name="input"))
        if not math.isfinite(self.output):
            raise InvalidArgumentError(f"output must be finite, got {self.output}")
        object.__setattr__(self, "output", float(self.output))


class MeasurementModel(abc.ABC):
    """A network ``g(x, u)`` mapping weights and an input pattern to a scalar.

    Subclasses declare ``weight_dim`` and ``input_dim`` and implement
    :meth:`evaluate`. :meth:`evaluate_batch` evaluates many weight vectors at
    once; the default loops over :meth:`evaluate`, subclasses vectorize it.
    No derivative of any kind is part of this interface.
    """

    weight_dim: int
    input_dim: int

    @abc.abstractmethod
    def evaluate(self, x: Array, u: Array) -> float:
        ...

    def evaluate_batch(self, xs: Array, u: Array) -> Array:
        """Evaluate every row of ``xs`` (shape ``(n, weight_dim)``) at input ``u``."""
        xs = np.asarray(xs, dtype=float)
        return np.array([self.evaluate(row, u) for row in xs], dtype=float)

    def check(self, x, u) -> tuple[Array, Array]:
        return (
            as_vector(x, self.weight_dim, "weight vector"),
            as_vector(u, self.input_dim, "input"),
        )


@dataclass(frozen=True)
class EstimationError:
    per_step_error: Array
    squared_norm: float = field(init=False)

    def __post_init__(self):
        e = np.asarray(self.per_step_error, dtype=float)
        object.__setattr__(self, "per_step_error", e)
        object.__setattr__(self, "squared_norm", float(e @ e))

    @classmethod
    def between(cls, x_true, x_hat) -> "EstimationError":
        x_true = as_vector(x_true, name="true weights")
        x_hat = as_vector(x_hat, len(x_true), "estimate")
        return cls(x_true - x_hat)


def propagate(x, q: float, noise_draw) -> Array:
    """Advance the weight random walk by one step.

    Parameters
    ----------
    x : array_like, shape (d,)
        Current weights.
    q : float
        Process-noise variance per coordinate.
    noise_draw : array_like, shape (d,)
        Standard-normal draw supplied by the caller.

    Returns
    -------
    numpy.ndarray
        ``x + sqrt(q) * noise_draw`` as a new array.
    """
    x = as_vector(x, name="x")
    draw = as_vector(noise_draw, name="noise_draw")
    if draw.shape != x.shape:
        raise InvalidArgumentError(
            f"noise_draw has length {draw.shape[0]}, expected {x.shape[0]}"
        )
    if not (math.isfinite(q) and q >= 0.0):
        raise InvalidArgumentError(f"q must be finite and >= 0, got {q}")
    return x + math.sqrt(q) * draw


def residual(model: MeasurementModel, x, ex: TrainingExample) -> float:
    """Realized measurement noise ``y - g(x, u)``."""
    x, u = model.check(x, ex.input)
    return ex.output - model.evaluate(x, u)


def mean_squared_error(errors: Sequence[EstimationError]) -> float:
    if len(errors) == 0:
        raise InvalidArgumentError("mean_squared_error needs at least one error")
    return float(np.mean([e.squared_norm for e in errors]))
