"""C-Net: content compression, the shared-convolution streams and fusion."""
from __future__ import annotations

import numpy as np

from .ndkernel import Tensor, ops, parameter
from .ndkernel.init import xavier_uniform

CONV_FILTERS = 8
CONV_KERNEL = 5
STREAM_UNITS = 32


def compress_geometry(M: int, L: int) -> tuple[int, int]:
    """Stride and kernel of the single-filter temporal conv mapping M frames to exactly L."""
    if L < 2 or M < L:
        raise ValueError(f"cannot compress {M} frames to {L}; resample upstream first")
    stride = M // L
    kernel = M - stride * (L - 1)
    return stride, kernel


def compress_content(frames: Tensor, weight: Tensor, L: int) -> Tensor:
    """(N, M, D) -> (N, L, D) with one learned temporal filter."""
    N, M, D = frames.shape
    stride, kernel = compress_geometry(M, L)
    if weight.shape != (1, kernel, 1):
        raise ValueError(f"compress filter must be (1, {kernel}, 1) for M={M}, L={L}; got {weight.shape}")
    out = ops.conv2d_valid(frames, weight, (stride, 1))  # (N, 1, L, D)
    return ops.reshape(out, (N, L, D))


def stream_forward(segment: Tensor, params: dict[str, Tensor], prefix: str,
                   keep: float = 0.75, train: bool = False,
                   rng: np.random.Generator | None = None) -> Tensor:
    """Shared conv -> ReLU -> flatten -> FC(32) -> ReLU -> dropout -> FC(32) -> ReLU -> dropout."""
    N, L, D = segment.shape
    if L < CONV_KERNEL:
        raise ValueError(f"stream input needs at least {CONV_KERNEL} frames, got {L}")
    h = ops.conv2d_valid(segment, params["cnet.conv.W"])  # (N, 8, L-4, D)
    h = ops.relu(h + ops.reshape(params["cnet.conv.b"], (1, CONV_FILTERS, 1, 1)))
    h = ops.reshape(h, (N, CONV_FILTERS * (L - CONV_KERNEL + 1) * D))
    h = ops.relu(ops.dense_affine(h, params[f"{prefix}.fc1.W"], params[f"{prefix}.fc1.b"]))
    h = ops.dropout(h, keep, train, rng)
    h = ops.relu(ops.dense_affine(h, params[f"{prefix}.fc2.W"], params[f"{prefix}.fc2.b"]))
    return ops.dropout(h, keep, train, rng)


def fuse(stream_outputs: list[Tensor], params: dict[str, Tensor]) -> Tensor:
    """Concatenate the stream vectors and map to class probabilities."""
    h = stream_outputs[0] if len(stream_outputs) == 1 else ops.concat(stream_outputs, axis=-1)
    logits = ops.dense_affine(h, params["cnet.fusion.W"], params["cnet.fusion.b"])
    return ops.softmax(logits)


def classify(emotion_seg: Tensor | None, content_seg: Tensor | None, params: dict[str, Tensor],
             keep: float = 0.75, train: bool = False,
             rng: np.random.Generator | None = None) -> Tensor:
    """Class probabilities from the emotion and/or content stream (``None`` drops a stream)."""
    if emotion_seg is not None and content_seg is not None and emotion_seg.shape != content_seg.shape:
        raise ValueError(f"stream inputs differ in shape: {emotion_seg.shape} vs {content_seg.shape}")
    outs = []
    if emotion_seg is not None:
        outs.append(stream_forward(emotion_seg, params, "cnet.estream", keep, train, rng))
    if content_seg is not None:
        outs.append(stream_forward(content_seg, params, "cnet.cstream", keep, train, rng))
    return fuse(outs, params)


def classification_loss(probs: Tensor, labels: np.ndarray) -> Tensor:
    K = probs.shape[-1]
    onehot = np.eye(K, dtype=probs.dtype)[np.asarray(labels)]
    return ops.cross_entropy(probs, onehot)


def init_cnet(rng: np.random.Generator, M: int, L: int, D: int, K: int,
              emotion_stream: bool = True, content_stream: bool = True,
              dtype=np.float32) -> dict[str, Tensor]:
    params: dict[str, Tensor] = {}

    def add(name, value):
        params[name] = parameter(value, name)

    if content_stream:
        _, kernel = compress_geometry(M, L)
        # starts as a moving average over the kernel window
        add("cnet.compress.W", np.full((1, kernel, 1), 1.0 / kernel, dtype))
    add("cnet.conv.W", xavier_uniform(rng, CONV_KERNEL, CONV_FILTERS * CONV_KERNEL,
                                      (CONV_FILTERS, CONV_KERNEL, 1), dtype))
    add("cnet.conv.b", np.zeros(CONV_FILTERS, dtype))
    flat = CONV_FILTERS * (L - CONV_KERNEL + 1) * D
    streams = [s for s, on in (("estream", emotion_stream), ("cstream", content_stream)) if on]
    for s in streams:
        add(f"cnet.{s}.fc1.W", xavier_uniform(rng, flat, STREAM_UNITS, (flat, STREAM_UNITS), dtype))
        add(f"cnet.{s}.fc1.b", np.zeros(STREAM_UNITS, dtype))
        add(f"cnet.{s}.fc2.W", xavier_uniform(rng, STREAM_UNITS, STREAM_UNITS, (STREAM_UNITS, STREAM_UNITS), dtype))
        add(f"cnet.{s}.fc2.b", np.zeros(STREAM_UNITS, dtype))
    width = STREAM_UNITS * len(streams)
    add("cnet.fusion.W", np.zeros((width, K), dtype))
    add("cnet.fusion.b", np.zeros(K, dtype))
    return params
