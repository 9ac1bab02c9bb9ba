"""Differentiable operations used by the networks.

Every function accepts and returns :class:`Tensor`. Leading axes are
treated as batch axes wherever that is meaningful, so a whole minibatch
goes through one call.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import Tensor, as_tensor


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, a.dtype)

    def backward(g):
        a.accumulate(_unbroadcast(g, a.shape))
        b.accumulate(_unbroadcast(g, b.shape))

    return Tensor.from_op(a.data + b.data, (a, b), backward)


def mul(a, b) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b, a.dtype)

    def backward(g):
        if a.requires_grad:
            a.accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b.accumulate(_unbroadcast(g * a.data, b.shape))

    return Tensor.from_op(a.data * b.data, (a, b), backward)


def neg(a: Tensor) -> Tensor:
    return Tensor.from_op(-a.data, (a,), lambda g: a.accumulate(-g))


def sum(x: Tensor, axis=None) -> Tensor:  # noqa: A001 - mirrors numpy
    out = x.data.sum(axis=axis)

    def backward(g):
        if axis is None:
            x.accumulate(np.broadcast_to(g, x.shape).copy())
        else:
            x.accumulate(np.broadcast_to(np.expand_dims(g, axis), x.shape).copy())

    return Tensor.from_op(np.asarray(out), (x,), backward)


def mean(x: Tensor, axis=None) -> Tensor:
    n = x.data.size if axis is None else x.shape[axis]
    return mul(sum(x, axis), 1.0 / n)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    return Tensor.from_op(x.data.reshape(shape), (x,), lambda g: x.accumulate(g.reshape(x.shape)))


def broadcast_to(x: Tensor, shape: Sequence[int]) -> Tensor:
    out = np.broadcast_to(x.data, shape).copy()
    return Tensor.from_op(out, (x,), lambda g: x.accumulate(_unbroadcast(g, x.shape)))


def index_rows(x: Tensor, index) -> Tensor:
    """Select along the first axis (integer array, slice or boolean mask)."""
    out = x.data[index]

    def backward(g):
        full = np.zeros_like(x.data)
        np.add.at(full, index, g)
        x.accumulate(full)

    return Tensor.from_op(out, (x,), backward)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    datas = [t.data for t in tensors]
    out = np.concatenate(datas, axis=axis)
    bounds = np.cumsum([d.shape[axis] for d in datas])[:-1]

    def backward(g):
        for t, piece in zip(tensors, np.split(g, bounds, axis=axis)):
            t.accumulate(piece)

    return Tensor.from_op(out, tuple(tensors), backward)


def dense_affine(x: Tensor, W: Tensor, b: Tensor) -> Tensor:
    """``x @ W + b`` over the last axis of ``x``."""
    if x.shape[-1] != W.shape[0] or W.ndim != 2 or b.shape != (W.shape[1],):
        raise ValueError(
            f"dense_affine shape mismatch: x{x.shape} W{W.shape} b{b.shape}"
        )
    out = x.data @ W.data + b.data

    def backward(g):
        if x.requires_grad:
            x.accumulate(g @ W.data.T)
        g2 = g.reshape(-1, g.shape[-1])
        if W.requires_grad:
            W.accumulate(x.data.reshape(-1, x.shape[-1]).T @ g2)
        b.accumulate(g2.sum(axis=0))

    return Tensor.from_op(out, (x, W, b), backward)


def conv2d_valid(x: Tensor, filters: Tensor, stride: tuple[int, int] = (1, 1)) -> Tensor:
    """Valid (unpadded) cross-correlation of single-channel images.

    ``x`` is ``(H, W)`` or batched ``(N, H, W)``; ``filters`` is
    ``(F, kh, kw)``. The result is ``(F, H', W')`` or ``(N, F, H', W')``.
    """
    batched = x.ndim == 3
    xd = x.data if batched else x.data[None]
    if filters.ndim != 3:
        raise ValueError(f"filters must be (F, kh, kw), got {filters.shape}")
    _, H, Wd = xd.shape
    F, kh, kw = filters.shape
    sh, sw = stride
    if kh > H or kw > Wd:
        raise ValueError(f"kernel {kh}x{kw} larger than input {H}x{Wd}")
    Ho = (H - kh) // sh + 1
    Wo = (Wd - kw) // sw + 1
    windows = sliding_window_view(xd, (kh, kw), axis=(1, 2))[:, ::sh, ::sw][:, :Ho, :Wo]
    # windows: (N, Ho, Wo, kh, kw)
    out = np.einsum("nhwij,fij->nfhw", windows, filters.data, optimize=True)

    def backward(g):
        gb = g if batched else g[None]
        if filters.requires_grad:
            filters.accumulate(np.einsum("nhwij,nfhw->fij", windows, gb, optimize=True))
        if x.requires_grad:
            gx = np.zeros_like(xd)
            for i in range(kh):
                for j in range(kw):
                    contrib = np.einsum("nfhw,f->nhw", gb, filters.data[:, i, j])
                    gx[:, i : i + sh * (Ho - 1) + 1 : sh, j : j + sw * (Wo - 1) + 1 : sw] += contrib
            x.accumulate(gx if batched else gx[0])

    return Tensor.from_op(out if batched else out[0], (x, filters), backward)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return Tensor.from_op(x.data * mask, (x,), lambda g: x.accumulate(g * mask))


def sigmoid(x: Tensor) -> Tensor:
    # split by sign so exp never overflows
    z = x.data
    e = np.exp(-np.abs(z))
    out = np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e)).astype(z.dtype)
    return Tensor.from_op(out, (x,), lambda g: x.accumulate(g * out * (1.0 - out)))


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)
    return Tensor.from_op(out, (x,), lambda g: x.accumulate(g * (1.0 - out * out)))


def softmax(z: Tensor, axis: int = -1) -> Tensor:
    shifted = z.data - z.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        z.accumulate(out * (g - (g * out).sum(axis=axis, keepdims=True)))

    return Tensor.from_op(out, (z,), backward)


LOG_EPS = 1e-12


def cross_entropy(y_hat: Tensor, y) -> Tensor:
    """Per-example ``-sum_k y_k log(y_hat_k)``; the log argument is clamped at 1e-12.

    Returns a scalar for a single distribution and shape ``(N,)`` for a batch.
    """
    y = np.asarray(y.data if isinstance(y, Tensor) else y)
    if y.shape != y_hat.shape:
        raise ValueError(f"target shape {y.shape} != prediction shape {y_hat.shape}")
    if not (np.all((y == 0) | (y == 1)) and np.all(y.sum(axis=-1) == 1)):
        raise ValueError("target is not one-hot")
    p = y_hat.data
    clamped = np.maximum(p, LOG_EPS)
    out = -(y * np.log(clamped)).sum(axis=-1)

    def backward(g):
        live = p >= LOG_EPS
        y_hat.accumulate(-np.expand_dims(g, -1) * y * live / clamped)

    return Tensor.from_op(np.asarray(out, dtype=p.dtype), (y_hat,), backward)


def dropout(x: Tensor, keep: float, train: bool, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout: survivors are scaled by ``1/keep`` so inference is identity."""
    if not (0.0 < keep <= 1.0):
        raise ValueError(f"keep ratio must lie in (0, 1], got {keep}")
    if not train or keep == 1.0:
        return x
    if rng is None:
        raise ValueError("train-mode dropout needs an rng")
    mask = (rng.random(x.shape) < keep).astype(x.dtype) / x.dtype.type(keep)
    return Tensor.from_op(x.data * mask, (x,), lambda g: x.accumulate(g * mask))


def square_loss(pred: Tensor, target) -> Tensor:
    """Sum of squared differences over the last axis."""
    t = np.asarray(target.data if isinstance(target, Tensor) else target, dtype=pred.dtype)
    diff = pred.data - t
    out = (diff * diff).sum(axis=-1)
    return Tensor.from_op(np.asarray(out), (pred,), lambda g: pred.accumulate(2.0 * np.expand_dims(g, -1) * diff))


def weighted_sum(weights: Tensor, x: Tensor) -> Tensor:
    """``out[n, d] = sum_t weights[n, t] * x[n, t, d]``."""
    out = np.einsum("nt,ntd->nd", weights.data, x.data)

    def backward(g):
        if weights.requires_grad:
            weights.accumulate(np.einsum("nd,ntd->nt", g, x.data))
        if x.requires_grad:
            x.accumulate(np.einsum("nd,nt->ntd", g, weights.data))

    return Tensor.from_op(out, (weights, x), backward)
