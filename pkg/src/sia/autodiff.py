"""Minimal reverse-mode autodiff over float64 numpy arrays.

Small tape: each op records its parents and a closure that scatters the
incoming gradient. Evaluation order is fixed by construction order, so
gradients are bit-reproducible for identical inputs.
"""

from __future__ import annotations

import numpy as np


class Tensor:
    __slots__ = ("value", "grad", "_parents", "_backward")

    def __init__(self, value, _parents=(), _backward=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.value.shape

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        self.grad += g

    # -- operators ----------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            return mul(self, power(other, -1.0))
        return mul(self, 1.0 / other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __repr__(self):
        return f"Tensor(shape={self.value.shape}, grad={'set' if self.grad is not None else 'none'})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a gradient back to the shape it was broadcast from."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.value + b.value, (a, b))

    def backward(g):
        a._accumulate(_unbroadcast(g, a.value.shape))
        b._accumulate(_unbroadcast(g, b.value.shape))

    out._backward = backward
    return out


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.value * b.value, (a, b))

    def backward(g):
        a._accumulate(_unbroadcast(g * b.value, a.value.shape))
        b._accumulate(_unbroadcast(g * a.value, b.value.shape))

    out._backward = backward
    return out


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = Tensor(a.value @ b.value, (a, b))

    def backward(g):
        a._accumulate(g @ b.value.T)
        b._accumulate(a.value.T @ g)

    out._backward = backward
    return out


def transpose(a) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.value.T, (a,))

    def backward(g):
        a._accumulate(g.T)

    out._backward = backward
    return out


def power(a, exponent: float) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.value ** exponent, (a,))

    def backward(g):
        a._accumulate(g * exponent * a.value ** (exponent - 1.0))

    out._backward = backward
    return out


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = Tensor(np.exp(a.value), (a,))

    def backward(g):
        a._accumulate(g * out.value)

    out._backward = backward
    return out


def log(a) -> Tensor:
    a = as_tensor(a)
    out = Tensor(np.log(a.value), (a,))

    def backward(g):
        a._accumulate(g / a.value)

    out._backward = backward
    return out


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    # numerically stable two-branch form
    v = a.value
    s = np.where(v >= 0, 1.0 / (1.0 + np.exp(-np.abs(v))), np.exp(-np.abs(v)) / (1.0 + np.exp(-np.abs(v))))
    out = Tensor(s, (a,))

    def backward(g):
        a._accumulate(g * out.value * (1.0 - out.value))

    out._backward = backward
    return out


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.value.sum(axis=axis, keepdims=keepdims), (a,))

    def backward(g):
        if axis is None:
            a._accumulate(np.broadcast_to(g, a.value.shape).copy())
        else:
            gg = g if keepdims else np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(gg, a.value.shape).copy())

    out._backward = backward
    return out


def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    count = a.value.size if axis is None else a.value.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def softmax_rows(a) -> Tensor:
    """Softmax along the last axis with max-subtraction for stability."""
    a = as_tensor(a)
    z = a.value - a.value.max(axis=-1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=-1, keepdims=True)
    out = Tensor(s, (a,))

    def backward(g):
        inner = (g * out.value).sum(axis=-1, keepdims=True)
        a._accumulate(out.value * (g - inner))

    out._backward = backward
    return out


def clip(a, lo: float, hi: float) -> Tensor:
    """Clamp values; gradient passes only through the unclamped region."""
    a = as_tensor(a)
    out = Tensor(np.clip(a.value, lo, hi), (a,))
    passthrough = (a.value > lo) & (a.value < hi)

    def backward(g):
        a._accumulate(g * passthrough)

    out._backward = backward
    return out


def gather_rows(table, ids) -> Tensor:
    """Select rows ``table[ids]``; gradients scatter-add back into the table."""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.intp)
    out = Tensor(table.value[ids], (table,))

    def backward(g):
        if table.grad is None:
            table.grad = np.zeros_like(table.value)
        np.add.at(table.grad, ids, g)

    out._backward = backward
    return out


def concat_cols(parts: list) -> Tensor:
    parts = [as_tensor(p) for p in parts]
    out = Tensor(np.concatenate([p.value for p in parts], axis=1), tuple(parts))
    widths = [p.value.shape[1] for p in parts]

    def backward(g):
        start = 0
        for p, w in zip(parts, widths):
            p._accumulate(g[:, start:start + w])
            start += w

    out._backward = backward
    return out


def backward(loss: Tensor, seed: float = 1.0) -> None:
    """Accumulate d(loss)/d(node) into every reachable node's ``grad``."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    loss._accumulate(np.full_like(loss.value, seed))
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
