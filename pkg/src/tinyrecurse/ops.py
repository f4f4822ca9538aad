"""Differentiable array operations used by the model.

Each op computes with numpy (matmuls go straight to BLAS) or dispatches to
the fused kernel backend, and registers a vjp on the tape via ``record``.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .tape import Tensor, record


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a gradient back to the shape of a broadcast operand."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.data + b.data

    def vjp(g):
        ga = _unbroadcast(g, a.data.shape) if a.requires_grad else None
        gb = _unbroadcast(g, b.data.shape) if b.requires_grad else None
        return ga, gb

    return record(out, (a, b), vjp)


def add_n(tensors) -> Tensor:
    """Elementwise sum of same-shape tensors."""
    ts = tuple(tensors)
    out = ts[0].data.copy()
    for t in ts[1:]:
        out += t.data

    def vjp(g):
        return tuple(g if t.requires_grad else None for t in ts)

    return record(out, ts, vjp)


def scale(a: Tensor, c: float) -> Tensor:
    out = a.data * c

    def vjp(g):
        return (g * c,)

    return record(out, (a,), vjp)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data @ b.data

    def vjp(g):
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.data.shape)
        if b.requires_grad:
            gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.data.shape)
        return ga, gb

    return record(out, (a, b), vjp)


def reshape(a: Tensor, shape) -> Tensor:
    orig = a.data.shape

    def vjp(g):
        return (g.reshape(orig),)

    return record(a.data.reshape(shape), (a,), vjp)


def transpose(a: Tensor, axes) -> Tensor:
    inv = np.argsort(axes)

    def vjp(g):
        return (g.transpose(inv),)

    return record(a.data.transpose(axes), (a,), vjp)


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row gather from an embedding table; grad scatter-adds back."""
    out = table.data[ids]

    def vjp(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids.reshape(-1), g.reshape(-1, table.data.shape[1]))
        return (gt,)

    return record(out, (table,), vjp)


def mean_axis1(a: Tensor) -> Tensor:
    """Mean over the sequence axis of [B,L,D]."""
    n = a.data.shape[1]
    out = a.data.mean(axis=1)

    def vjp(g):
        return (np.repeat(g[:, None, :] / n, n, axis=1),)

    return record(out, (a,), vjp)


def col(a: Tensor, j: int) -> Tensor:
    """Column j of a 2-D tensor."""
    out = a.data[:, j].copy()

    def vjp(g):
        ga = np.zeros_like(a.data)
        ga[:, j] = g
        return (ga,)

    return record(out, (a,), vjp)


def rmsnorm(x: Tensor, weight: Tensor, eps: float) -> Tensor:
    """Root-mean-square normalization over the last axis, scaled by weight.

    Raises on non-finite input (detected via the per-row mean square, which
    is also non-finite or overflows exactly when the row is).
    """
    if eps <= 0:
        raise ValueError("rmsnorm eps must be positive")
    d = x.data.shape[-1]
    x2 = np.ascontiguousarray(x.data.reshape(-1, d))
    out2, inv = kernels.rmsnorm_fwd(x2, weight.data, eps)
    if not np.all(np.isfinite(inv) & (inv > 0)):
        raise FloatingPointError("rmsnorm: non-finite input")
    out = out2.reshape(x.data.shape)

    def vjp(g):
        g2 = np.ascontiguousarray(g.reshape(-1, d))
        gx2, gw = kernels.rmsnorm_bwd(x2, weight.data, inv, g2)
        gx = gx2.reshape(x.data.shape) if x.requires_grad else None
        return gx, (gw if weight.requires_grad else None)

    return record(out, (x, weight), vjp)


def silu_mul(a: Tensor, b: Tensor) -> Tensor:
    """silu(a) * b with a fused kernel, same shapes."""
    out = kernels.silu_mul_fwd(a.data, b.data)

    def vjp(g):
        ga, gb = kernels.silu_mul_bwd(a.data, b.data, np.ascontiguousarray(g))
        return (ga if a.requires_grad else None), (gb if b.requires_grad else None)

    return record(out, (a, b), vjp)


def rotary(x: Tensor, cos: np.ndarray, sin: np.ndarray) -> Tensor:
    """Rotary position encoding on [B,H,L,dh]; cos/sin are constants."""
    if x.data.shape[-1] % 2 != 0:
        raise ValueError("rotary requires an even head dimension")
    xc = np.ascontiguousarray(x.data)
    out = kernels.rotary_fwd(xc, cos, sin)

    def vjp(g):
        return (kernels.rotary_bwd(np.ascontiguousarray(g), cos, sin),)

    return record(out, (x,), vjp)


def softmax_last(x: Tensor) -> Tensor:
    """Softmax over the last axis."""
    k = x.data.shape[-1]
    x2 = np.ascontiguousarray(x.data.reshape(-1, k))
    p2 = kernels.softmax_fwd(x2)
    out = p2.reshape(x.data.shape)

    def vjp(g):
        g2 = np.ascontiguousarray(g.reshape(-1, k))
        return (kernels.softmax_bwd(p2, g2).reshape(x.data.shape),)

    return record(out, (x,), vjp)
