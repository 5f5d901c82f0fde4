from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class RmspropState:
    """Running mean of squared gradients, one accumulator per parameter."""

    learning_rate: float = 0.0005
    decay: float = 0.9
    epsilon: float = 1e-8
    acc: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params, **kwargs) -> "RmspropState":
        state = cls(**kwargs)
        state.acc = {k: np.zeros_like(v, dtype=np.float64) for k, v in params.items()}
        return state


def rmsprop_step(params: dict, grads: dict, state: RmspropState):
    """In-place update ``p -= lr * g / sqrt(acc + eps)`` after decaying ``acc``.

    Parameters without an entry in ``grads`` are left alone and their
    accumulators are not touched.
    """
    rho, lr, eps = state.decay, state.learning_rate, state.epsilon
    for name, g in grads.items():
        p = params[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {name} {p.shape}")
        acc = state.acc.get(name)
        if acc is None:
            acc = state.acc[name] = np.zeros_like(p)
        elif acc.shape != p.shape:
            raise ValueError(f"accumulator shape {acc.shape} does not match parameter {name} {p.shape}")
        acc *= rho
        acc += (1.0 - rho) * g * g
        p -= lr * g / np.sqrt(acc + eps)
    return params, state
