"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, no_grad


def _scalarize(out, proj):
    return float(np.sum(np.asarray(out.data) * proj))


def check_gradients(op, inputs, eps=1e-5, wrt=None, projection_seed=1234) -> float:
    """Max relative error between analytic and central-difference gradients.

    `op(*inputs)` must return a Tensor. Gradients are checked for every
    entry of every tensor in `wrt` (default: the inputs that require
    grad). The op output is reduced to a scalar through a fixed random
    projection so all output entries contribute. Relative error is
    |a - n| / max(1, |a|, |n|), i.e. absolute for small gradients.
    """
    inputs = [x if isinstance(x, Tensor) else Tensor(x) for x in inputs]
    if wrt is None:
        wrt = [t for t in inputs if t.requires_grad]
    if not wrt:
        raise ValueError("nothing to differentiate: empty wrt")

    out = op(*inputs)
    proj = np.random.Generator(np.random.PCG64(projection_seed)).standard_normal(
        out.shape
    )
    for t in wrt:
        t.zero_grad()
    loss = (out * Tensor(proj)).sum()
    loss.backward()

    max_err = 0.0
    with no_grad():
        for t in wrt:
            analytic = np.zeros_like(t.data) if t.grad is None else t.grad
            flat = t.data.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                f_plus = _scalarize(op(*inputs), proj)
                flat[i] = orig - eps
                f_minus = _scalarize(op(*inputs), proj)
                flat[i] = orig
                numeric = (f_plus - f_minus) / (2.0 * eps)
                a = analytic.reshape(-1)[i]
                err = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
                max_err = max(max_err, err)
    return max_err
