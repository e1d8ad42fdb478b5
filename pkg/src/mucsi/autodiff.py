"""Minimal reverse-mode automatic differentiation over float64 numpy arrays.

Just the operations the feedback pipeline needs. Each op records a closure
that pushes vector-Jacobian products into its parents; ``backward`` walks the
graph once in reverse topological order. Matrix operands must be at least
2-D (callers add a batch axis for single vectors).
"""

from __future__ import annotations

import numpy as np

from . import backend


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scale(self, -1.0)


def parameter(data):
    return Tensor(data, requires_grad=True)


_grad_enabled = True


class no_grad:
    """Context manager that skips graph recording (forward-only passes)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(data, parents, backward_fn):
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _accumulate(t, g):
    # first contribution is stored by reference; nothing mutates grads in
    # place, so aliasing a consumer's buffer is safe
    if t.requires_grad:
        t.grad = g if t.grad is None else t.grad + g


def _unbroadcast(g, shape):
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def backward(root):
    """Accumulate gradients of ``root`` (summed over all its entries)."""
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    root.grad = np.ones_like(root.data)
    for node in reversed(order):
        if node._backward is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# elementwise / broadcasting ops
# ---------------------------------------------------------------------------


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)

    def back(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    return _node(a.data + b.data, (a, b), back)


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)

    def back(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, -_unbroadcast(g, b.data.shape))

    return _node(a.data - b.data, (a, b), back)


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)

    def back(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _node(a.data * b.data, (a, b), back)


def div(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out_data = a.data / b.data

    def back(g):
        _accumulate(a, _unbroadcast(g / b.data, a.data.shape))
        _accumulate(b, _unbroadcast(-g * out_data / b.data, b.data.shape))

    return _node(out_data, (a, b), back)


def scale(a, c):
    a = _as_tensor(a)
    c = float(c)

    def back(g):
        _accumulate(a, g * c)

    return _node(a.data * c, (a,), back)


def relu(a):
    a = _as_tensor(a)
    mask = a.data > 0

    def back(g):
        _accumulate(a, g * mask)

    return _node(a.data * mask, (a,), back)


def sqrt(a):
    a = _as_tensor(a)
    out_data = np.sqrt(a.data)

    def back(g):
        _accumulate(a, g * (0.5 / out_data))

    return _node(out_data, (a,), back)


# ---------------------------------------------------------------------------
# shape ops
# ---------------------------------------------------------------------------


def reshape(a, shape):
    a = _as_tensor(a)

    def back(g):
        _accumulate(a, g.reshape(a.data.shape))

    return _node(a.data.reshape(shape), (a,), back)


def swapaxes(a, ax1, ax2):
    a = _as_tensor(a)

    def back(g):
        _accumulate(a, g.swapaxes(ax1, ax2))

    return _node(a.data.swapaxes(ax1, ax2), (a,), back)


# ---------------------------------------------------------------------------
# contractions and reductions
# ---------------------------------------------------------------------------


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError("matmul operands must be at least 2-D")

    def back(g):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g @ b.data.swapaxes(-1, -2), a.data.shape))
        if b.requires_grad:
            if b.ndim == 2 and (a.ndim > 2 or g.ndim > 2):
                # parameter matrix under a batched operand: flatten the batch
                # into rows and take one GEMM instead of batched GEMM + sum
                cols = a.data.shape[-1]
                gb = a.data.reshape(-1, cols).T @ g.reshape(-1, g.shape[-1])
            else:
                gb = _unbroadcast(a.data.swapaxes(-1, -2) @ g, b.data.shape)
            _accumulate(b, gb)

    return _node(a.data @ b.data, (a, b), back)


def reduce_sum(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    out_data = a.data.sum(axis=axis, keepdims=keepdims)

    def back(g):
        if axis is None:
            _accumulate(a, np.broadcast_to(g, a.data.shape).copy())
            return
        gg = g
        if not keepdims:
            axes = axis if isinstance(axis, tuple) else (axis,)
            for ax in sorted(a_ % a.data.ndim for a_ in axes):
                gg = np.expand_dims(gg, ax)
        _accumulate(a, np.broadcast_to(gg, a.data.shape).copy())

    return _node(out_data, (a,), back)


def reduce_mean(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    if axis is None:
        count = a.data.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = 1
        for ax in axes:
            count *= a.data.shape[ax]
    return scale(reduce_sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


# ---------------------------------------------------------------------------
# fused primitives backed by the kernel dispatch layer
# ---------------------------------------------------------------------------


def softmax_last(a):
    """Softmax over the last axis."""
    a = _as_tensor(a)
    cols = a.data.shape[-1]
    y2 = backend.softmax_rows(a.data.reshape(-1, cols))
    out_data = y2.reshape(a.data.shape)

    def back(g):
        gx = backend.softmax_rows_vjp(y2, g.reshape(-1, cols))
        _accumulate(a, gx.reshape(a.data.shape))

    return _node(out_data, (a,), back)


def layer_norm(x, gain, bias, eps):
    """Per-row standardization over the last axis, then affine gain/bias."""
    x, gain, bias = _as_tensor(x), _as_tensor(gain), _as_tensor(bias)
    cols = x.data.shape[-1]
    y2, xhat, inv_std = backend.layernorm_rows(
        x.data.reshape(-1, cols), gain.data, bias.data, eps
    )

    def back(g):
        gx, ggain, gbias = backend.layernorm_rows_vjp(
            g.reshape(-1, cols), xhat, inv_std, gain.data
        )
        _accumulate(x, gx.reshape(x.data.shape))
        _accumulate(gain, ggain)
        _accumulate(bias, gbias)

    return _node(y2.reshape(x.data.shape), (x, gain, bias), back)
