"""Two-layer ELU perceptron blocks stored as flat named parameter arrays."""
from __future__ import annotations

import numpy as np

from . import tensor as T
from .functional import elu


def glorot_uniform(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))


def init_mlp2(rng, prefix: str, d_in: int, d_hidden: int, d_out: int) -> dict[str, np.ndarray]:
    """Glorot weights, zero biases. Weights are (out, in); biases are (1, out)."""
    return {
        f"{prefix}.W1": glorot_uniform(rng, d_hidden, d_in),
        f"{prefix}.b1": np.zeros((1, d_hidden)),
        f"{prefix}.W2": glorot_uniform(rng, d_out, d_hidden),
        f"{prefix}.b2": np.zeros((1, d_out)),
    }


def mlp2(params, prefix: str, x):
    """Tape version: ``W2 @ elu(W1 @ x + b1) + b2`` applied row-wise."""
    h = T.elu(T.linear(x, params[f"{prefix}.W1"], params[f"{prefix}.b1"]))
    return T.linear(h, params[f"{prefix}.W2"], params[f"{prefix}.b2"])


def mlp2_forward(params, prefix: str, x) -> np.ndarray:
    """Numeric forward on a single vector or a batch of rows."""
    W1 = np.asarray(params[f"{prefix}.W1"])
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != W1.shape[1]:
        raise ValueError(f"{prefix}: expected input of width {W1.shape[1]}, got {x.shape[-1]}")
    h = elu(x @ W1.T + np.asarray(params[f"{prefix}.b1"]).reshape(-1))
    return h @ np.asarray(params[f"{prefix}.W2"]).T + np.asarray(params[f"{prefix}.b2"]).reshape(-1)
