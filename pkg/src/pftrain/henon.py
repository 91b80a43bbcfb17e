"""Henon oscillator: ground-truth simulation, noisy datasets and model replay."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import Array, InvalidArgumentError, TrainingExample, as_vector

#: Beyond this magnitude the Henon trajectory has left the basin and escapes.
DIVERGENCE_BOUND = 10.0


class DivergedTrajectoryError(RuntimeError):
    def __init__(self, step: int, value: float):
        super().__init__(f"Henon trajectory diverged at step {step} (|xi| = {abs(value):.3g} > {DIVERGENCE_BOUND})")
        self.step = step
        self.value = value


@dataclass(frozen=True)
class HenonParams:
    a: float = 1.4
    b: float = 0.3
    c: float = 1.0


@dataclass(frozen=True, eq=False)
class Dataset:
    """Training pairs built from noisy outputs, plus the clean states for evaluation."""

    examples: tuple[TrainingExample, ...]
    clean_states: Array
    noisy_outputs: Array
    measurement_noise_std: float

    def __len__(self):
        return len(self.examples)


def henon_step(params: HenonParams, xi_prev: float, xi_prev2: float) -> float:
    return params.c - params.a * xi_prev * xi_prev + params.b * xi_prev2


def generate_dataset(
    params: HenonParams,
    length: int,
    noise_std: float,
    warmup: int,
    init: tuple[float, float],
    rng: np.random.Generator,
) -> Dataset:
    """Simulate ``length`` states after ``warmup`` discarded steps and add noise.

    ``length`` counts states including the two initial ones, so the dataset
    holds ``length - 2`` examples; example ``t`` has input
    ``[y(t-1), y(t-2)]`` and output ``y(t)``, all taken from the *noisy*
    sequence.
    """
    if length < 3:
        raise InvalidArgumentError(f"length must be at least 3, got {length}")
    if warmup < 0 or noise_std < 0:
        raise InvalidArgumentError("warmup and noise_std must be non-negative")
    xi = np.empty(warmup + length)
    xi[0], xi[1] = init
    for t in range(2, xi.shape[0]):
        xi[t] = henon_step(params, xi[t - 1], xi[t - 2])
        if not abs(xi[t]) <= DIVERGENCE_BOUND:
            raise DivergedTrajectoryError(t, xi[t])
    clean = xi[warmup:]
    y = clean + noise_std * rng.standard_normal(length)
    examples = tuple(
        TrainingExample(np.array([y[t - 1], y[t - 2]]), y[t]) for t in range(2, length)
    )
    return Dataset(examples, clean, y, float(noise_std))


@dataclass(frozen=True, eq=False)
class Replay:
    """States from an autonomous run of a trained model.

    ``diverged_at`` is the index into ``states`` where ``|xi|`` first exceeded
    the divergence bound; iteration stops there, so later entries are NaN.
    """

    states: Array
    diverged_at: int | None = None

    @property
    def diverged(self) -> bool:
        return self.diverged_at is not None


def simulate_trained(x_hat, steps: int, init: tuple[float, float]) -> Replay:
    """Iterate the learned regressor model from ``init`` for ``steps`` new states."""
    x = as_vector(x_hat, 5, "x_hat")
    if steps < 1:
        raise InvalidArgumentError(f"steps must be positive, got {steps}")
    out = np.full(steps, np.nan)
    prev2, prev = float(init[0]), float(init[1])
    for t in range(steps):
        # same operation order as henon_step, so x* replays the true map bit for bit
        nxt = x[0] + x[4] * prev * prev + x[1] * prev2 + x[3] * prev + x[2] * prev2 * prev2
        out[t] = nxt
        if not abs(nxt) <= DIVERGENCE_BOUND:
            return Replay(out, t)
        prev2, prev = prev, nxt
    return Replay(out)


def attractor_points(seq: Sequence[float]) -> list[tuple[float, float]]:
    """Delay-embedding pairs ``(seq[t-1], seq[t])``."""
    seq = np.asarray(seq, dtype=float)
    if seq.ndim != 1 or seq.shape[0] < 2:
        raise InvalidArgumentError("need at least two values for a delay embedding")
    return list(zip(seq[:-1].tolist(), seq[1:].tolist()))


def one_step_rmse(x_hat, states: Sequence[float]) -> float:
    """RMSE of the learned map predicting ``states[t]`` from the two previous states."""
    x = as_vector(x_hat, 5, "x_hat")
    s = np.asarray(states, dtype=float)
    if s.shape[0] < 3:
        raise InvalidArgumentError("need at least three states")
    p1, p2 = s[1:-1], s[:-2]
    pred = x[0] + x[1] * p2 + x[2] * p2**2 + x[3] * p1 + x[4] * p1**2
    return float(np.sqrt(np.mean((pred - s[2:]) ** 2)))
