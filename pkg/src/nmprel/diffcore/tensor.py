"""A small reverse-mode tape over float64 numpy arrays.

Only the operations the message-passing network needs are provided. Each op
builds a new :class:`Tensor` whose ``_backward`` closure pushes the incoming
gradient to its parents.
"""
from __future__ import annotations

import numpy as np

from .. import kernels


class BackwardError(RuntimeError):
    """Raised when backward is requested without a recorded forward pass."""


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad=False, name=None, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self._parents = _parents
        self._backward = _backward
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def backward(self):
        backward(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data, name=None) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True, name=name)


def _node(data, parents, fn):
    parents = tuple(parents)
    if not any(p.requires_grad for p in parents):
        return Tensor(data)
    return Tensor(data, _parents=parents, _backward=fn)


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every leaf that requires it."""
    if not isinstance(loss, Tensor):
        raise BackwardError("backward() needs the scalar Tensor produced by a forward pass")
    if loss.data.size != 1:
        raise BackwardError(f"backward() needs a scalar loss, got shape {loss.data.shape}")

    order = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack.append((p, False))

    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node._accumulate(g)
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            if id(parent) in grads:
                grads[id(parent)] = grads[id(parent)] + pg
            else:
                grads[id(parent)] = pg


# -- ops ---------------------------------------------------------------------


def linear(x: Tensor, W: Tensor, b: Tensor | None = None) -> Tensor:
    """Row-batched affine map ``x @ W.T + b`` with ``W`` shaped (out, in)."""
    x, W = as_tensor(x), as_tensor(W)
    if x.data.shape[-1] != W.data.shape[1]:
        raise ValueError(f"input width {x.data.shape[-1]} does not match weight columns {W.data.shape[1]}")
    out = x.data @ W.data.T
    parents = [x, W]
    if b is not None:
        b = as_tensor(b)
        out = out + b.data
        parents.append(b)

    def fn(g):
        grads = [g @ W.data, g.T @ x.data]
        if b is not None:
            grads.append(g.sum(axis=0, keepdims=True).reshape(b.data.shape))
        return grads

    return _node(out, parents, fn)


def elu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    neg = np.expm1(np.minimum(x.data, 0.0))
    out = np.where(x.data > 0, x.data, neg)

    def fn(g):
        return [g * np.where(x.data > 0, 1.0, neg + 1.0)]

    return _node(out, [x], fn)


def concat(a: Tensor, b: Tensor) -> Tensor:
    """Column-wise concatenation ``[a; b]`` for each row."""
    a, b = as_tensor(a), as_tensor(b)
    k = a.data.shape[1]
    out = np.concatenate([a.data, b.data], axis=1)

    def fn(g):
        return [g[:, :k], g[:, k:]]

    return _node(out, [a, b], fn)


def gather_rows(x: Tensor, index) -> Tensor:
    x = as_tensor(x)
    index = np.asarray(index, dtype=np.int64)
    n = x.data.shape[0]

    def fn(g):
        return [kernels.segment_sum(g, index, n)]

    return _node(x.data[index], [x], fn)


def segment_mean(x: Tensor, index, counts) -> Tensor:
    """Mean of the rows of ``x`` grouped by ``index``; empty groups give zero rows."""
    x = as_tensor(x)
    index = np.asarray(index, dtype=np.int64)
    counts = np.asarray(counts, dtype=np.float64)
    scale = np.where(counts > 0, 1.0 / np.maximum(counts, 1.0), 0.0)[:, None]
    out = kernels.segment_sum(x.data, index, len(counts)) * scale

    def fn(g):
        return [(g * scale)[index]]

    return _node(out, [x], fn)


def mean_softmax_cross_entropy(logits: Tensor, targets, floor: float = 1e-12) -> Tensor:
    """Mean over rows of ``-log(softmax(logits)[target] + floor)``."""
    logits = as_tensor(logits)
    targets = np.asarray(targets, dtype=np.int64)
    rows = np.arange(len(targets))
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)
    pt = p[rows, targets]
    loss = -np.log(pt + floor).mean()

    def fn(g):
        onehot = np.zeros_like(p)
        onehot[rows, targets] = 1.0
        w = (pt / (pt + floor))[:, None]
        return [g * w * (p - onehot) / len(targets)]

    return _node(np.array(loss), [logits], fn)


def square_error(x: Tensor, target) -> Tensor:
    """Sum of squared residuals; used by the linear-regression checks."""
    x = as_tensor(x)
    r = x.data - np.asarray(target, dtype=np.float64)

    def fn(g):
        return [2.0 * g * r]

    return _node(np.array((r * r).sum()), [x], fn)
