"""Plain numeric versions of the activation and loss functions."""
import numpy as np

PROB_FLOOR = 1e-12


def elu(x, alpha=1.0):
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x > 0, x, alpha * np.expm1(np.minimum(x, 0.0)))
    return out.item() if out.ndim == 0 else out


def softmax(z):
    """Softmax over the last axis, shifted by the max for stability."""
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(probs, target: int) -> float:
    probs = np.asarray(probs, dtype=np.float64)
    if not 0 <= target < probs.shape[-1]:
        raise IndexError(f"target {target} out of range for {probs.shape[-1]} classes")
    return float(-np.log(probs[target] + PROB_FLOOR))
