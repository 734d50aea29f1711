"""Jacobian of a decoupled network's output with respect to one value layer.

Once the activation channel has fixed every linearization, the output is an
affine function of any single value layer's parameters, so the Jacobian
computed here is exact rather than a local approximation.

Columns are ordered weights row-major, then biases.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .ddnn import Ddnn, _layer_index, apply_delta, eval_ddnn, linearizations, value_pass
from .network import ActivationPattern


@dataclass(frozen=True)
class ParamJacobian:
    base: np.ndarray
    matrix: np.ndarray

    def predict(self, delta) -> np.ndarray:
        return self.base + self.matrix @ np.asarray(delta, dtype=np.float64)


def param_jacobian(
    ddnn: Ddnn,
    layer: int,
    x,
    pattern_override: Optional[ActivationPattern] = None,
) -> ParamJacobian:
    """Exact output Jacobian w.r.t. value layer ``layer`` (1-based) at ``x``."""
    k = _layer_index(ddnn, layer)
    lins = linearizations(ddnn, x, pattern_override)
    vals = value_pass(ddnn, x, lins)

    # d(output)/d(value output of layer k), composed backwards through the
    # frozen downstream layers.
    back = np.eye(ddnn.out_dim)
    for j in range(len(ddnn) - 1, k, -1):
        back = (back * lins[j].slope) @ ddnn.val_layers[j].weights

    gate = back * lins[k].slope  # m x out_dim
    v_in = vals[k]
    m, rows = gate.shape
    w_block = (gate[:, :, None] * v_in[None, None, :]).reshape(m, rows * v_in.shape[0])
    return ParamJacobian(vals[-1], np.hstack([w_block, gate]))


def finite_difference_check(ddnn: Ddnn, layer: int, x, h: float = 1e-4) -> float:
    """Max abs gap between the Jacobian and central differences of ``eval_ddnn``."""
    if h <= 0:
        raise ValueError("step must be positive")
    jac = param_jacobian(ddnn, layer, x)
    p = jac.matrix.shape[1]
    worst = 0.0
    for col in range(p):
        e = np.zeros(p)
        e[col] = h
        plus = eval_ddnn(apply_delta(ddnn, layer, e), x)
        minus = eval_ddnn(apply_delta(ddnn, layer, -e), x)
        fd = (plus - minus) / (2 * h)
        worst = max(worst, float(np.max(np.abs(fd - jac.matrix[:, col]))))
    return worst
