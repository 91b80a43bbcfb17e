"""Exact Kalman filter for networks that are affine in their weights.

With a random-walk state and a scalar measurement ``y = c @ x + v`` the
recursion needs no matrix inversion; the covariance is updated in Joseph form
to stay symmetric and positive semi-definite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .model import Array, InvalidArgumentError, InvalidStateError, NoiseSpec, TrainingExample
from .networks import AffineFunctionalNetwork


@dataclass(frozen=True, eq=False)
class KalmanState:
    mean: Array
    covariance: Array

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.covariance, dtype=float)
        if mean.ndim != 1 or cov.shape != (mean.shape[0], mean.shape[0]):
            raise InvalidArgumentError(
                f"mean shape {mean.shape} and covariance shape {cov.shape} are inconsistent"
            )
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise InvalidStateError("Kalman state is not finite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @classmethod
    def isotropic(cls, mean, scale: float = 1.0) -> "KalmanState":
        mean = np.asarray(mean, dtype=float)
        return cls(mean, scale * np.eye(mean.shape[0]))

    @property
    def std(self) -> Array:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))


def kf_predict(s: KalmanState, q: float) -> KalmanState:
    if not (math.isfinite(q) and q >= 0.0):
        raise InvalidArgumentError(f"q must be finite and >= 0, got {q}")
    if q == 0.0:
        return s
    return KalmanState(s.mean, s.covariance + q * np.eye(s.mean.shape[0]))


def kf_update(s: KalmanState, c, y: float, r: float) -> KalmanState:
    """Scalar-measurement update with observation row ``c``."""
    c = np.asarray(c, dtype=float)
    if c.shape != s.mean.shape:
        raise InvalidArgumentError(f"observation row has shape {c.shape}, expected {s.mean.shape}")
    if not (np.all(np.isfinite(c)) and math.isfinite(y) and math.isfinite(r)):
        raise InvalidStateError("non-finite observation passed to kf_update")
    if r <= 0.0:
        raise InvalidArgumentError(f"r must be > 0, got {r}")
    p = s.covariance
    pc = p @ c
    innovation_var = float(c @ pc) + r
    gain = pc / innovation_var
    mean = s.mean + gain * (y - float(c @ s.mean))
    a = np.eye(p.shape[0]) - np.outer(gain, c)
    cov = a @ p @ a.T + r * np.outer(gain, gain)
    return KalmanState(mean, 0.5 * (cov + cov.T))


def kf_run(
    model: AffineFunctionalNetwork,
    data: Iterable[TrainingExample],
    noise: NoiseSpec,
    init: KalmanState,
) -> list[KalmanState]:
    """Alternate predict and update over ``data``; returns the posterior after each example."""
    states = []
    s = init
    for ex in data:
        s = kf_update(kf_predict(s, noise.q), model.regressor(ex.input), ex.output, noise.r)
        states.append(s)
    if not states:
        raise InvalidArgumentError("kf_run needs at least one training example")
    return states
