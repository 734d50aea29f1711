"""Dense feed-forward networks: representation, evaluation, activation patterns.

A network is an ordered list of dense layers ``y = act(W x + b)``. Layers and
networks are immutable; arrays are stored as read-only float64 copies.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InputError, UnsupportedActivationError


class ActivationKind(enum.Enum):
    RELU = "relu"
    TANH = "tanh"
    IDENTITY = "identity"

    @property
    def is_pwl(self) -> bool:
        return self is not ActivationKind.TANH

    def apply(self, z: np.ndarray) -> np.ndarray:
        if self is ActivationKind.RELU:
            return np.maximum(z, 0.0)
        if self is ActivationKind.TANH:
            return np.tanh(z)
        return z.copy()

    @classmethod
    def parse(cls, value) -> "ActivationKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InputError(f"unknown activation {value!r}") from None


def _frozen(a, ndim: int, what: str) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    if arr.ndim != ndim:
        raise InputError(f"{what} must be {ndim}-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{what} contains NaN or infinite entries")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Layer:
    """One dense layer: ``activation(weights @ x + bias)``."""

    weights: np.ndarray
    bias: np.ndarray
    activation: ActivationKind = ActivationKind.RELU

    def __post_init__(self):
        w = _frozen(self.weights, 2, "weights")
        b = _frozen(self.bias, 1, "bias")
        if w.shape[0] < 1 or w.shape[1] < 1:
            raise InputError(f"layer weights must be non-empty, got shape {w.shape}")
        if b.shape[0] != w.shape[0]:
            raise InputError(
                f"bias length {b.shape[0]} does not match weight rows {w.shape[0]}"
            )
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)
        object.__setattr__(self, "activation", ActivationKind.parse(self.activation))

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def num_params(self) -> int:
        return self.out_dim * (self.in_dim + 1)

    def preactivation(self, x: np.ndarray) -> np.ndarray:
        return self.weights @ x + self.bias

    def __eq__(self, other):
        if not isinstance(other, Layer):
            return NotImplemented
        return (
            self.activation is other.activation
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.bias, other.bias)
        )

    __hash__ = None

    def __repr__(self):
        return f"Layer({self.in_dim}->{self.out_dim}, {self.activation.value})"


def _check_chain(layers: Sequence[Layer]) -> tuple:
    layers = tuple(layers)
    if not layers:
        raise InputError("a network needs at least one layer")
    for i in range(1, len(layers)):
        if layers[i].in_dim != layers[i - 1].out_dim:
            raise InputError(
                f"layer {i + 1} expects {layers[i].in_dim} inputs but layer {i} "
                f"produces {layers[i - 1].out_dim}"
            )
    return layers


@dataclass(frozen=True, eq=False)
class Dnn:
    layers: tuple

    def __post_init__(self):
        object.__setattr__(self, "layers", _check_chain(self.layers))

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    @property
    def widths(self) -> tuple:
        return (self.in_dim,) + tuple(layer.out_dim for layer in self.layers)

    def __eq__(self, other):
        if not isinstance(other, Dnn):
            return NotImplemented
        return len(self.layers) == len(other.layers) and all(
            a == b for a, b in zip(self.layers, other.layers)
        )

    __hash__ = None

    def __len__(self):
        return len(self.layers)

    def __repr__(self):
        return f"Dnn(widths={self.widths})"


@dataclass(frozen=True)
class ActivationPattern:
    """Which linear piece each PWL neuron is on.

    ``masks[i]`` is a tuple of booleans for ReLU layer ``i`` (True means the
    pre-activation is non-negative) and None for identity layers.
    """

    masks: tuple

    @classmethod
    def from_arrays(cls, masks) -> "ActivationPattern":
        return cls(tuple(None if m is None else tuple(bool(v) for v in m) for m in masks))

    def layer_mask(self, i: int) -> Optional[np.ndarray]:
        m = self.masks[i]
        return None if m is None else np.array(m, dtype=bool)

    def bits(self) -> str:
        """Compact string form, one group per ReLU layer, e.g. ``"011|10"``."""
        return "|".join("".join("1" if v else "0" for v in m) for m in self.masks if m is not None)


@dataclass(frozen=True)
class EvalTrace:
    input: np.ndarray
    preactivations: tuple
    postactivations: tuple

    @property
    def output(self) -> np.ndarray:
        return self.postactivations[-1]


def as_input(x, dim: int) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if arr.ndim != 1 or arr.shape[0] != dim:
        raise InputError(f"expected an input vector of length {dim}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError("input contains NaN or infinite entries")
    return arr


def is_pwl(net) -> bool:
    """True iff every layer's activation is ReLU or identity."""
    return all(layer.activation.is_pwl for layer in _layers_of(net))


def _layers_of(net):
    # A decoupled net partitions input space by its activation channel.
    return getattr(net, "act_layers", None) or net.layers


def require_pwl(net) -> None:
    for i, layer in enumerate(_layers_of(net)):
        if not layer.activation.is_pwl:
            raise UnsupportedActivationError(
                f"layer {i + 1} uses {layer.activation.value}, which is not piecewise-linear"
            )


def eval_trace(dnn: Dnn, x) -> EvalTrace:
    v = as_input(x, dnn.in_dim)
    pre, post = [], []
    cur = v
    for layer in dnn.layers:
        z = layer.preactivation(cur)
        cur = layer.activation.apply(z)
        pre.append(z)
        post.append(cur)
    return EvalTrace(v, tuple(pre), tuple(post))


def eval_dnn(dnn: Dnn, x) -> np.ndarray:
    v = as_input(x, dnn.in_dim)
    for layer in dnn.layers:
        v = layer.activation.apply(layer.preactivation(v))
    return v


def pattern_from_preactivations(layers: Sequence[Layer], pre: Sequence[np.ndarray]) -> ActivationPattern:
    masks = []
    for i, (layer, z) in enumerate(zip(layers, pre)):
        if layer.activation is ActivationKind.RELU:
            masks.append(tuple(bool(v) for v in (z >= 0.0)))
        elif layer.activation is ActivationKind.IDENTITY:
            masks.append(None)
        else:
            raise UnsupportedActivationError(
                f"layer {i + 1} uses {layer.activation.value}; patterns need PWL layers"
            )
    return ActivationPattern(tuple(masks))


def activation_pattern(dnn: Dnn, x) -> ActivationPattern:
    """Pattern at ``x``; a zero pre-activation is tagged non-negative."""
    require_pwl(dnn)
    return pattern_from_preactivations(dnn.layers, eval_trace(dnn, x).preactivations)


def check_pattern(layers: Sequence[Layer], pattern: ActivationPattern) -> None:
    if len(pattern.masks) != len(layers):
        raise InputError(
            f"pattern covers {len(pattern.masks)} layers, network has {len(layers)}"
        )
    for i, (layer, m) in enumerate(zip(layers, pattern.masks)):
        if layer.activation is ActivationKind.RELU:
            if m is None or len(m) != layer.out_dim:
                raise InputError(f"pattern for layer {i + 1} must have {layer.out_dim} tags")
        elif layer.activation is ActivationKind.IDENTITY:
            if m is not None:
                raise InputError(f"identity layer {i + 1} carries no pattern tags")
        else:
            raise UnsupportedActivationError(
                f"layer {i + 1} uses {layer.activation.value}; patterns need PWL layers"
            )


def eval_with_pattern(dnn: Dnn, x, pattern: ActivationPattern) -> np.ndarray:
    """Evaluate with every ReLU frozen to the piece named by ``pattern``."""
    check_pattern(dnn.layers, pattern)
    v = as_input(x, dnn.in_dim)
    for layer, m in zip(dnn.layers, pattern.masks):
        z = layer.preactivation(v)
        if m is None:
            v = z
        else:
            v = np.where(np.array(m, dtype=bool), z, 0.0)
    return v
