"""Concrete measurement models: the Henon affine regressor and a small MLP."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .model import Array, InvalidArgumentError, MeasurementModel, as_vector

#: Henon weights for a=1.4, b=0.3, c=1 in regressor order
#: [constant, xi(t-2), xi(t-2)^2, xi(t-1), xi(t-1)^2].
HENON_TRUE_WEIGHTS = np.array([1.0, 0.3, 0.0, 0.0, -1.4])


def henon_basis(u) -> Array:
    """Regressor row ``[1, u2, u2**2, u1, u1**2]`` for ``u = [y(t-1), y(t-2)]``."""
    u1, u2 = as_vector(u, 2, "u")
    return np.array([1.0, u2, u2 * u2, u1, u1 * u1])


class AffineFunctionalNetwork(MeasurementModel):
    """Network whose output is ``basis(u) @ x``, i.e. linear in the weights."""

    def __init__(self, basis: Callable[[Array], Array], weight_dim: int, input_dim: int):
        self.basis = basis
        self.weight_dim = int(weight_dim)
        self.input_dim = int(input_dim)

    def regressor(self, u) -> Array:
        u = as_vector(u, self.input_dim, "input")
        row = np.asarray(self.basis(u), dtype=float)
        if row.shape != (self.weight_dim,):
            raise InvalidArgumentError(
                f"basis returned shape {row.shape}, expected ({self.weight_dim},)"
            )
        return row

    def evaluate(self, x, u) -> float:
        x = as_vector(x, self.weight_dim, "weight vector")
        return float(self.regressor(u) @ x)

    def evaluate_batch(self, xs, u) -> Array:
        return np.asarray(xs, dtype=float) @ self.regressor(u)


def henon_network() -> AffineFunctionalNetwork:
    return AffineFunctionalNetwork(henon_basis, weight_dim=5, input_dim=2)


def affine_forward(net: AffineFunctionalNetwork, x, u) -> float:
    return net.evaluate(x, u)


# --- multi-layer perceptron -------------------------------------------------


def mlp_weight_dim(layer_sizes: Sequence[int]) -> int:
    return sum(a * b + b for a, b in zip(layer_sizes[:-1], layer_sizes[1:]))


def pack_mlp_weights(layers: Sequence[tuple[Array, Array]]) -> Array:
    """Flatten ``[(W, b), ...]`` layer by layer: W row-major, then b.

    ``W`` has shape ``(fan_out, fan_in)`` so that a layer computes ``W @ h + b``.
    """
    parts = []
    fan_in = None
    for i, (w, b) in enumerate(layers):
        w = np.asarray(w, dtype=float)
        b = np.asarray(b, dtype=float)
        if w.ndim != 2 or b.shape != (w.shape[0],):
            raise InvalidArgumentError(
                f"layer {i}: weight shape {w.shape} and bias shape {b.shape} are inconsistent"
            )
        if fan_in is not None and w.shape[1] != fan_in:
            raise InvalidArgumentError(
                f"layer {i}: expects {w.shape[1]} inputs but previous layer has {fan_in} outputs"
            )
        fan_in = w.shape[0]
        parts += [w.ravel(), b]
    if not parts:
        raise InvalidArgumentError("at least one layer is required")
    return np.concatenate(parts)


def unpack_mlp_weights(x, layer_sizes: Sequence[int]) -> list[tuple[Array, Array]]:
    x = np.asarray(x, dtype=float)
    expected = mlp_weight_dim(layer_sizes)
    if x.ndim != 1 or x.shape[0] != expected:
        raise InvalidArgumentError(
            f"layer sizes {list(layer_sizes)} need {expected} weights, got shape {x.shape}"
        )
    layers = []
    pos = 0
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        w = x[pos : pos + fan_in * fan_out].reshape(fan_out, fan_in).copy()
        pos += fan_in * fan_out
        b = x[pos : pos + fan_out].copy()
        pos += fan_out
        layers.append((w, b))
    return layers


@dataclass(frozen=True, eq=False)
class MultiLayerPerceptron(MeasurementModel):
    """Feed-forward net with tanh hidden layers and a linear scalar output."""

    layer_sizes: tuple[int, ...] = (1, 8, 1)

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise InvalidArgumentError(f"invalid layer sizes {self.layer_sizes}")
        if sizes[-1] != 1:
            raise InvalidArgumentError("the output layer must have exactly one unit")
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def weight_dim(self) -> int:
        return mlp_weight_dim(self.layer_sizes)

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    def evaluate(self, x, u) -> float:
        x, u = self.check(x, u)
        return float(self.evaluate_batch(x[None, :], u)[0])

    def evaluate_batch(self, xs, u) -> Array:
        xs = np.asarray(xs, dtype=float)
        if xs.ndim != 2 or xs.shape[1] != self.weight_dim:
            raise InvalidArgumentError(
                f"expected weights of shape (n, {self.weight_dim}), got {xs.shape}"
            )
        h = np.broadcast_to(as_vector(u, self.input_dim, "input"), (xs.shape[0], self.input_dim))
        pos = 0
        n_layers = len(self.layer_sizes) - 1
        for k, (fan_in, fan_out) in enumerate(zip(self.layer_sizes[:-1], self.layer_sizes[1:])):
            w = xs[:, pos : pos + fan_in * fan_out].reshape(-1, fan_out, fan_in)
            pos += fan_in * fan_out
            b = xs[:, pos : pos + fan_out]
            pos += fan_out
            h = np.einsum("noi,ni->no", w, h) + b
            if k < n_layers - 1:
                h = np.tanh(h)
        return h[:, 0]


def mlp_forward(net: MultiLayerPerceptron, x, u) -> float:
    return net.evaluate(x, u)
