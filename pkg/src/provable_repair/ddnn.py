"""Decoupled networks.

A decoupled network carries two weight sets per layer. The activation channel
runs as an ordinary network and decides, at every neuron, the linearization of
the activation function around its pre-activation. The value channel computes
the output, passing each pre-activation through those frozen linearizations.
Editing only the value channel never moves the linear regions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import InputError
from .network import (
    ActivationKind,
    ActivationPattern,
    Dnn,
    Layer,
    as_input,
    check_pattern,
)


@dataclass(frozen=True, eq=False)
class Ddnn:
    act_layers: tuple
    val_layers: tuple

    def __post_init__(self):
        act = tuple(self.act_layers)
        val = tuple(self.val_layers)
        # Reuse the Dnn constructor for the chain checks.
        Dnn(act)
        Dnn(val)
        if len(act) != len(val):
            raise InputError(
                f"activation channel has {len(act)} layers, value channel has {len(val)}"
            )
        for i, (a, v) in enumerate(zip(act, val)):
            if a.weights.shape != v.weights.shape:
                raise InputError(
                    f"layer {i + 1}: channel shapes differ "
                    f"({a.weights.shape} vs {v.weights.shape})"
                )
            if a.activation is not v.activation:
                raise InputError(f"layer {i + 1}: channel activations differ")
        object.__setattr__(self, "act_layers", act)
        object.__setattr__(self, "val_layers", val)

    @property
    def in_dim(self) -> int:
        return self.act_layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.act_layers[-1].out_dim

    @property
    def activation_channel(self) -> Dnn:
        return Dnn(self.act_layers)

    @property
    def value_channel(self) -> Dnn:
        return Dnn(self.val_layers)

    def __len__(self):
        return len(self.act_layers)

    def __eq__(self, other):
        if not isinstance(other, Ddnn):
            return NotImplemented
        return self.activation_channel == other.activation_channel and (
            self.value_channel == other.value_channel
        )

    __hash__ = None

    def __repr__(self):
        return f"Ddnn(widths={self.activation_channel.widths})"


@dataclass(frozen=True)
class Linearization:
    """Coordinate-wise affine map ``u -> slope * u + intercept``."""

    slope: np.ndarray
    intercept: np.ndarray

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return self.slope * u + self.intercept


def decouple(dnn: Dnn) -> Ddnn:
    return Ddnn(dnn.layers, dnn.layers)


def linearize(kind: ActivationKind, z) -> Linearization:
    """Linearization of ``kind`` around ``z``.

    ReLU at exactly zero gets the zero line (slope 0, intercept 0); it agrees
    with ReLU at the centre, which is all the decoupled semantics need.
    """
    z = np.asarray(z, dtype=np.float64)
    if kind is ActivationKind.RELU:
        return Linearization((z > 0).astype(np.float64), np.zeros_like(z))
    if kind is ActivationKind.TANH:
        t = np.tanh(z)
        slope = 1.0 - t * t
        return Linearization(slope, t - slope * z)
    return Linearization(np.ones_like(z), np.zeros_like(z))


def _pattern_linearization(layer: Layer, mask) -> Linearization:
    n = layer.out_dim
    if mask is None:
        return Linearization(np.ones(n), np.zeros(n))
    return Linearization(np.array(mask, dtype=np.float64), np.zeros(n))


def linearizations(ddnn: Ddnn, x, pattern: Optional[ActivationPattern] = None) -> list:
    """Per-layer linearizations fixed by the activation channel at ``x``.

    With ``pattern`` given, ReLU slopes come from the pattern instead of the
    activation channel, so a point on a region boundary can be treated as a
    member of the region the pattern names.
    """
    if pattern is not None:
        check_pattern(ddnn.act_layers, pattern)
        return [_pattern_linearization(l, m) for l, m in zip(ddnn.act_layers, pattern.masks)]
    v = as_input(x, ddnn.in_dim)
    out = []
    for layer in ddnn.act_layers:
        z = layer.preactivation(v)
        out.append(linearize(layer.activation, z))
        v = layer.activation.apply(z)
    return out


def value_pass(ddnn: Ddnn, x, lins: Sequence[Linearization]) -> list:
    """Value-channel vectors ``[v0, v1, ..., vn]`` under fixed linearizations."""
    v = as_input(x, ddnn.in_dim)
    vals = [v]
    for layer, lin in zip(ddnn.val_layers, lins):
        v = lin(layer.preactivation(v))
        vals.append(v)
    return vals


def eval_ddnn(ddnn: Ddnn, x, pattern: Optional[ActivationPattern] = None) -> np.ndarray:
    lins = linearizations(ddnn, x, pattern)
    return value_pass(ddnn, x, lins)[-1]


def _layer_index(ddnn: Ddnn, layer: int) -> int:
    if not isinstance(layer, (int, np.integer)) or not 1 <= layer <= len(ddnn):
        raise InputError(f"layer index must be in 1..{len(ddnn)}, got {layer!r}")
    return int(layer) - 1


def set_value_layer(ddnn: Ddnn, layer: int, weights, bias) -> Ddnn:
    """Copy of ``ddnn`` with value layer ``layer`` (1-based) replaced."""
    k = _layer_index(ddnn, layer)
    old = ddnn.val_layers[k]
    new = Layer(weights, bias, old.activation)
    if new.weights.shape != old.weights.shape:
        raise InputError(
            f"layer {layer} weights must have shape {old.weights.shape}, got {new.weights.shape}"
        )
    vals = list(ddnn.val_layers)
    vals[k] = new
    return Ddnn(ddnn.act_layers, tuple(vals))


def apply_delta(ddnn: Ddnn, layer: int, delta) -> Ddnn:
    """Shift value layer ``layer`` by a flat delta (weights row-major, then biases)."""
    k = _layer_index(ddnn, layer)
    old = ddnn.val_layers[k]
    delta = np.asarray(delta, dtype=np.float64)
    if delta.shape != (old.num_params,):
        raise InputError(f"delta must have {old.num_params} entries, got shape {delta.shape}")
    nw = old.weights.size
    dw = delta[:nw].reshape(old.weights.shape)
    return set_value_layer(ddnn, layer, old.weights + dw, old.bias + delta[nw:])
