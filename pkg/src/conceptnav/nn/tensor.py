"""Reverse-mode autodiff over numpy float64 arrays.

Define-by-run tape: every op returns a new Tensor and, when any input is
being tracked, a backward closure that scatters the output gradient onto
its parents. Broadcasting follows numpy rules; gradients of broadcast
operands are summed back to the operand shape.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

_GRAD_STACK = [True]


@contextmanager
def no_grad():
    """Disable tape construction inside the block (evaluation rollouts)."""
    _GRAD_STACK.append(False)
    try:
        yield
    finally:
        _GRAD_STACK.pop()


def grad_enabled() -> bool:
    return _GRAD_STACK[-1]


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents")

    def __init__(self, data, requires_grad=False):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._backward = None
        self._parents = ()

    # ---- bookkeeping ------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def backward(self, grad=None):
        """Accumulate gradients of this tensor w.r.t. every tracked leaf."""
        if grad is None:
            grad = np.ones_like(self.data)
        self.grad = np.asarray(grad, dtype=np.float64)

        # iterative post-order topological sort
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # ---- operator sugar ---------------------------------------------
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
            raise TypeError("divide by a scalar or use explicit ops")
        return mul(self, 1.0 / other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return take(self, idx)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def transpose(self, axes):
        return transpose(self, axes)

    @property
    def mT(self):
        axes = list(range(self.ndim))
        axes[-1], axes[-2] = axes[-2], axes[-1]
        return transpose(self, tuple(axes))

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis, keepdims)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _tracked(*tensors) -> bool:
    return grad_enabled() and any(
        isinstance(t, Tensor) and t.requires_grad for t in tensors
    )


def _result(data, parents, backward) -> Tensor:
    out = Tensor(data, requires_grad=True)
    out._parents = tuple(p for p in parents if p.requires_grad)
    out._backward = backward
    return out


def _accum(t: Tensor, g: np.ndarray):
    if t.requires_grad:
        t.grad = g if t.grad is None else t.grad + g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum `g` down to `shape` (inverse of numpy broadcasting)."""
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---- elementwise ----------------------------------------------------
def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    data = a.data + b.data
    if not _tracked(a, b):
        return Tensor(data)

    def backward(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(g, b.shape))

    return _result(data, (a, b), backward)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    data = a.data * b.data
    if not _tracked(a, b):
        return Tensor(data)

    def backward(g):
        _accum(a, _unbroadcast(g * b.data, a.shape))
        _accum(b, _unbroadcast(g * a.data, b.shape))

    return _result(data, (a, b), backward)


def relu(a):
    a = as_tensor(a)
    data = np.maximum(a.data, 0.0)
    if not _tracked(a):
        return Tensor(data)
    mask = a.data > 0.0

    def backward(g):
        _accum(a, g * mask)

    return _result(data, (a,), backward)


def exp(a):
    a = as_tensor(a)
    data = np.exp(a.data)
    if not _tracked(a):
        return Tensor(data)

    def backward(g):
        _accum(a, g * data)

    return _result(data, (a,), backward)


def log(a):
    a = as_tensor(a)
    data = np.log(a.data)
    if not _tracked(a):
        return Tensor(data)

    def backward(g):
        _accum(a, g / a.data)

    return _result(data, (a,), backward)


def tanh(a):
    a = as_tensor(a)
    data = np.tanh(a.data)
    if not _tracked(a):
        return Tensor(data)

    def backward(g):
        _accum(a, g * (1.0 - data * data))

    return _result(data, (a,), backward)


# ---- shape ----------------------------------------------------------
def reshape(a, shape):
    a = as_tensor(a)
    data = a.data.reshape(shape)
    if not _tracked(a):
        return Tensor(data)
    orig = a.shape

    def backward(g):
        _accum(a, g.reshape(orig))

    return _result(data, (a,), backward)


def transpose(a, axes):
    a = as_tensor(a)
    data = a.data.transpose(axes)
    if not _tracked(a):
        return Tensor(data)
    inverse = tuple(np.argsort(axes))

    def backward(g):
        _accum(a, g.transpose(inverse))

    return _result(data, (a,), backward)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    if not _tracked(*tensors):
        return Tensor(data)
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            _accum(t, piece)

    return _result(data, tensors, backward)


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    data = np.stack([t.data for t in tensors], axis=axis)
    if not _tracked(*tensors):
        return Tensor(data)

    def backward(g):
        for i, t in enumerate(tensors):
            _accum(t, np.take(g, i, axis=axis))

    return _result(data, tensors, backward)


def take(a, idx):
    """Indexing/gather. Basic slices and advanced integer indexing."""
    a = as_tensor(a)
    data = a.data[idx]
    if not _tracked(a):
        return Tensor(data)
    advanced = isinstance(idx, (np.ndarray, list)) or (
        isinstance(idx, tuple) and any(isinstance(i, (np.ndarray, list)) for i in idx)
    )

    def backward(g):
        z = np.zeros_like(a.data)
        if advanced:
            np.add.at(z, idx, g)
        else:
            z[idx] += g
        _accum(a, z)

    return _result(data, (a,), backward)


# ---- linear algebra --------------------------------------------------
def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError("matmul expects tensors with ndim >= 2")
    data = a.data @ b.data
    if not _tracked(a, b):
        return Tensor(data)

    def backward(g):
        _accum(a, _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.shape))
        _accum(b, _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape))

    return _result(data, (a, b), backward)


# ---- reductions ------------------------------------------------------
def tsum(a, axis=None, keepdims=False):
    a = as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)
    if not _tracked(a):
        return Tensor(data)
    shape = a.shape

    def backward(g):
        if axis is None:
            _accum(a, np.broadcast_to(g, shape).copy())
            return
        if not keepdims:
            g = np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(g, shape).copy())

    return _result(data, (a,), backward)


def tmean(a, axis=None, keepdims=False):
    a = as_tensor(a)
    count = a.size if axis is None else np.prod(
        [a.shape[ax] for ax in (axis if isinstance(axis, tuple) else (axis,))]
    )
    return mul(tsum(a, axis, keepdims), 1.0 / float(count))


# ---- fused numerical primitives --------------------------------------
def softmax(a, axis=-1):
    """Numerically stabilized softmax along `axis`."""
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)
    if not _tracked(a):
        return Tensor(y)

    def backward(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        _accum(a, y * (g - dot))

    return _result(y, (a,), backward)


def log_softmax(a, axis=-1):
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse
    if not _tracked(a):
        return Tensor(out)
    y = np.exp(out)

    def backward(g):
        _accum(a, g - y * g.sum(axis=axis, keepdims=True))

    return _result(out, (a,), backward)


def layer_norm(x, gamma, beta, eps=1e-5):
    """Layer normalization over the last axis."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    data = xhat * gamma.data + beta.data
    if not _tracked(x, gamma, beta):
        return Tensor(data)
    n = x.shape[-1]

    def backward(g):
        lead = tuple(range(g.ndim - 1))
        _accum(gamma, (g * xhat).sum(axis=lead))
        _accum(beta, g.sum(axis=lead))
        gx_hat = g * gamma.data
        term = gx_hat - gx_hat.mean(axis=-1, keepdims=True)
        term -= xhat * (gx_hat * xhat).sum(axis=-1, keepdims=True) / n
        _accum(x, inv * term)

    return _result(data, (x, gamma, beta), backward)


def take_rows(table, idx):
    """Embedding lookup: rows of `table` at integer index array `idx`."""
    table = as_tensor(table)
    idx = np.asarray(idx)
    data = table.data[idx]
    if not _tracked(table):
        return Tensor(data)

    def backward(g):
        z = np.zeros_like(table.data)
        np.add.at(z, idx, g)
        _accum(table, z)

    return _result(data, (table,), backward)
