"""A-Net: regress the segment parameters alpha and sample the segment.

``alpha = (a1, a2)`` is the half-open parameterisation of a continuous span
``[t_s, t_e]`` of an ``M``-frame sequence::

    a1 = (t_e - t_s) / M          t_s = M/2 (a2 - a1 + 1)
    a2 = (t_e + t_s) / M - 1      t_e = M/2 (a1 + a2 + 1)
"""
from __future__ import annotations

import numpy as np

from .ndkernel import Tensor, ops, parameter
from .ndkernel.init import xavier_uniform


def alpha_from_span(t_s, t_e, M):
    t_s = np.asarray(t_s, dtype=np.float64)
    t_e = np.asarray(t_e, dtype=np.float64)
    if np.any(t_e <= t_s):
        raise ValueError(f"span end must exceed start (t_s={t_s}, t_e={t_e})")
    return (t_e - t_s) / M, (t_e + t_s) / M - 1.0


def span_from_alpha(a1, a2, M):
    a1 = np.asarray(a1, dtype=np.float64)
    a2 = np.asarray(a2, dtype=np.float64)
    return 0.5 * M * (a2 - a1 + 1.0), 0.5 * M * (a1 + a2 + 1.0)


def round_span(t_s, t_e, M):
    """Inference rounding: half-up to integers, clamped to [1, M], at least one frame apart."""
    ts = np.clip(np.floor(np.asarray(t_s, dtype=np.float64) + 0.5), 1, M)
    te = np.clip(np.floor(np.asarray(t_e, dtype=np.float64) + 0.5), 1, M)
    te = np.where(te <= ts, np.minimum(ts + 1, M), te)
    ts = np.where(te <= ts, te - 1, ts)
    return ts.astype(np.int64), te.astype(np.int64)


def clamp_alpha(a1, a2, M, min_frames: float = 2.0):
    """Project alpha so the implied span lies inside [0, M] and covers >= ``min_frames``."""
    a1 = np.clip(np.asarray(a1, dtype=np.float64), min_frames / M, 1.0)
    a2 = np.clip(np.asarray(a2, dtype=np.float64), a1 - 1.0, 1.0 - a1)
    return a1, a2


def clamp_alpha_op(alpha: Tensor, M: int, min_frames: float = 2.0) -> Tensor:
    """Differentiable (piecewise linear) version of :func:`clamp_alpha` on ``(N, 2)``."""
    a = alpha.data
    lo = min_frames / M
    a1 = np.clip(a[:, 0], lo, 1.0)
    d1 = ((a[:, 0] >= lo) & (a[:, 0] <= 1.0)).astype(a.dtype)
    below = a[:, 1] < a1 - 1.0
    above = a[:, 1] > 1.0 - a1
    a2 = np.where(below, a1 - 1.0, np.where(above, 1.0 - a1, a[:, 1]))
    d2_da2 = (~below & ~above).astype(a.dtype)
    d2_da1 = np.where(below, 1.0, np.where(above, -1.0, 0.0)).astype(a.dtype)
    out = np.stack([a1, a2], axis=1).astype(a.dtype)

    def backward(g):
        g1 = g[:, 0] + g[:, 1] * d2_da1
        alpha.accumulate(np.stack([g1 * d1, g[:, 1] * d2_da2], axis=1))

    return Tensor.from_op(out, (alpha,), backward)


def sample_positions(alpha: np.ndarray, M: int, L: int) -> np.ndarray:
    """``(N, L)`` evenly spaced 1-based sample times spanning each segment inclusively."""
    t_s, t_e = span_from_alpha(alpha[:, 0], alpha[:, 1], M)
    grid = np.arange(L, dtype=np.float64) / (L - 1)
    return t_s[:, None] + grid[None, :] * (t_e - t_s)[:, None]


SNAP_TOL = 1e-9


def sample_segment(frames: Tensor, alpha: Tensor, L: int) -> Tensor:
    """Linear interpolation of ``frames`` (N, M, D) at L points of each span.

    Sample times outside [1, M] replicate the boundary frame. Gradients flow
    to ``alpha`` through the sample times and to ``frames`` through the
    interpolation weights.
    """
    if L < 2:
        raise ValueError(f"segment length L must be >= 2, got {L}")
    fr = frames.data
    N, M, D = fr.shape
    dt = fr.dtype
    p = sample_positions(alpha.data.astype(np.float64), M, L)
    inside = (p >= 1.0) & (p <= M)
    pc = np.clip(p, 1.0, float(M))
    # absorb roundoff from the alpha round trip so integer positions stay integer
    near = np.round(pc)
    pc = np.where(np.abs(pc - near) < SNAP_TOL, near, pc)
    lo = np.floor(pc).astype(np.int64)
    lo = np.minimum(lo, M - 1)  # p == M interpolates from M-1 with weight 1 on M
    w_hi = (pc - lo).astype(dt)
    w_lo = (1.0 - (pc - lo)).astype(dt)
    rows = np.arange(N)[:, None]
    f_lo = fr[rows, lo - 1]  # (N, L, D), 0-based gather
    f_hi = fr[rows, lo]
    out = w_lo[..., None] * f_lo + w_hi[..., None] * f_hi
    # exact copies where a weight vanishes, so aligned spans reproduce slices bit for bit
    out = np.where((w_hi == 0)[..., None], f_lo, out)
    out = np.where((w_lo == 0)[..., None], f_hi, out)

    grid = np.arange(L, dtype=np.float64) / (L - 1)
    dp_da1 = 0.5 * M * (2.0 * grid - 1.0)  # (L,)
    dp_da2 = 0.5 * M

    def backward(g):
        if alpha.requires_grad:
            slope = ((f_hi - f_lo) * g).sum(axis=-1) * inside  # dL/dp, (N, L)
            ga1 = (slope * dp_da1[None, :]).sum(axis=1)
            ga2 = slope.sum(axis=1) * dp_da2
            alpha.accumulate(np.stack([ga1, ga2], axis=1).astype(alpha.dtype))
        if frames.requires_grad:
            gf = np.zeros_like(fr)
            np.add.at(gf, (np.broadcast_to(rows, lo.shape), lo - 1), w_lo[..., None] * g)
            np.add.at(gf, (np.broadcast_to(rows, lo.shape), lo), w_hi[..., None] * g)
            frames.accumulate(gf)

    return Tensor.from_op(out.astype(dt), (frames, alpha), backward)


def attribution_loss(alpha_hat: Tensor, alpha) -> Tensor:
    """Per-example squared error between predicted and target alpha."""
    return ops.square_loss(alpha_hat, alpha)


def init_anet(rng: np.random.Generator, M: int, D: int, hidden: int = 128, dtype=np.float32) -> dict[str, Tensor]:
    """FC(M*D -> hidden) then FC(hidden -> 2); the last layer starts at zero so alpha = (0.5, 0)."""
    return {
        "anet.fc1.W": parameter(xavier_uniform(rng, M * D, hidden, (M * D, hidden), dtype), "anet.fc1.W"),
        "anet.fc1.b": parameter(np.zeros(hidden, dtype), "anet.fc1.b"),
        "anet.fc2.W": parameter(np.zeros((hidden, 2), dtype), "anet.fc2.W"),
        "anet.fc2.b": parameter(np.zeros(2, dtype), "anet.fc2.b"),
    }


def anet_forward(params: dict[str, Tensor], frames: Tensor, keep: float = 0.75,
                 train: bool = False, rng: np.random.Generator | None = None) -> Tensor:
    N, M, D = frames.shape
    W1 = params["anet.fc1.W"]
    if W1.shape[0] != M * D:
        raise ValueError(f"A-Net expects {W1.shape[0]} flattened inputs, got M*D={M * D}")
    h = ops.reshape(frames, (N, M * D))
    h = ops.relu(ops.dense_affine(h, W1, params["anet.fc1.b"]))
    h = ops.dropout(h, keep, train, rng)
    z = ops.dense_affine(h, params["anet.fc2.W"], params["anet.fc2.b"])
    # column 0 -> sigmoid (a1 in (0, 1)), column 1 -> tanh (a2 in (-1, 1))
    pick = np.array([1.0, 0.0], dtype=z.dtype)
    return ops.sigmoid(z) * pick + ops.tanh(z) * (1.0 - pick)
