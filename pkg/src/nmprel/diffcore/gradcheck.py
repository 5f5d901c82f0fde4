from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import Tensor, backward, parameter


def grad_check(loss_fn: Callable[[dict], Tensor], params: dict, step: float = 1e-5,
               names=None) -> float:
    """Max relative error between tape gradients and central differences.

    ``loss_fn`` maps a dict of parameter Tensors to a scalar loss Tensor. The
    relative error of an entry is ``|a - n| / max(|a|, |n|, 1e-8)``.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    tensors = {k: parameter(np.array(v, dtype=np.float64, copy=True), name=k) for k, v in params.items()}
    backward(loss_fn(tensors))

    worst = 0.0
    for name in names or list(tensors):
        t = tensors[name]
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        numeric = np.empty(flat.size)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + step
            up = float(loss_fn(tensors).data)
            flat[idx] = orig - step
            down = float(loss_fn(tensors).data)
            flat[idx] = orig
            numeric[idx] = (up - down) / (2.0 * step)
        a = analytic.reshape(-1)
        denom = np.maximum(np.maximum(np.abs(a), np.abs(numeric)), 1e-8)
        worst = max(worst, float(np.max(np.abs(a - numeric) / denom)))
    return worst
