"""Finite-difference verification of every differentiable op and of the full loss.

Each check builds small float64 inputs from a seed, projects the op output
onto a fixed random direction to get a scalar, and compares reverse-mode
gradients with central differences.
"""
from __future__ import annotations

import time
from typing import Callable

import numpy as np

from . import attribution as attr
from .baselines import attention_forward, init_attention
from .classification import compress_content
from .ndkernel import Tensor, ops, parameter
from .ndkernel.gradcheck import GradCheckResult, grad_check
from .network import BEACNet, ModelSpec

F64 = np.float64
# per-tensor entries differenced in the whole-model checks (the small op checks do every entry)
LOSS_ENTRIES = 24


def _project(out: Tensor, rng: np.random.Generator) -> Callable[[Tensor], Tensor]:
    r = Tensor(rng.standard_normal(out.shape))
    return lambda y: ops.sum(ops.mul(y, r))


def _op_check(build, inputs: dict[str, Tensor], rng) -> GradCheckResult:
    proj = _project(build(), rng)
    return grad_check(lambda: proj(build()), inputs)


def _p(rng, *shape, scale=1.0, name=None):
    return parameter(scale * rng.standard_normal(shape), name, F64)


def _away_from_kinks(x: np.ndarray, margin: float = 1e-3) -> np.ndarray:
    # keep ReLU inputs off the kink so central differences stay on one side
    return np.where(np.abs(x) < margin, np.sign(x + 1e-300) * margin * 2, x)


def check_dense_affine(rng):
    x, W, b = _p(rng, 3, 4), _p(rng, 4, 5), _p(rng, 5)
    return _op_check(lambda: ops.dense_affine(x, W, b), {"x": x, "W": W, "b": b}, rng)


def check_conv2d(rng):
    x, f = _p(rng, 12, 6), _p(rng, 2, 5, 1)
    return _op_check(lambda: ops.conv2d_valid(x, f), {"x": x, "f": f}, rng)


def check_conv2d_strided(rng):
    x, f = _p(rng, 2, 15, 3), _p(rng, 1, 5, 1)
    return _op_check(lambda: ops.conv2d_valid(x, f, (5, 1)), {"x": x, "f": f}, rng)


def check_relu(rng):
    x = parameter(_away_from_kinks(rng.standard_normal((4, 5))), dtype=F64)
    return _op_check(lambda: ops.relu(x), {"x": x}, rng)


def check_sigmoid_tanh(rng):
    x = _p(rng, 4, 3, scale=2.0)
    return _op_check(lambda: ops.add(ops.sigmoid(x), ops.tanh(x)), {"x": x}, rng)


def check_softmax_cross_entropy(rng):
    z = _p(rng, 3, 6)
    y = np.eye(6)[rng.integers(0, 6, 3)]
    return grad_check(lambda: ops.sum(ops.cross_entropy(ops.softmax(z), y)), {"z": z})


def check_softmax(rng):
    z = _p(rng, 2, 5)
    return _op_check(lambda: ops.softmax(z), {"z": z}, rng)


def check_dropout(rng):
    x = _p(rng, 4, 6)
    seed = int(rng.integers(2**31))
    return _op_check(lambda: ops.dropout(x, 0.75, True, np.random.default_rng(seed)), {"x": x}, rng)


def check_square_loss(rng):
    p, t = _p(rng, 5, 2), rng.standard_normal((5, 2))
    return _op_check(lambda: ops.square_loss(p, t), {"p": p}, rng)


def check_weighted_sum(rng):
    w, x = _p(rng, 2, 7), _p(rng, 2, 7, 3)
    return _op_check(lambda: ops.weighted_sum(w, x), {"w": w, "x": x}, rng)


def check_shape_ops(rng):
    a, b = _p(rng, 3, 4), _p(rng, 3, 2)
    idx = np.array([2, 0, 2])

    def build():
        h = ops.concat([a, b], axis=-1)
        h = ops.index_rows(h, idx)
        h = ops.reshape(h, (3, 3, 2))
        h = ops.broadcast_to(ops.mean(h, axis=0), (2, 3, 2))
        return ops.add(h, ops.sum(a))

    return _op_check(build, {"a": a, "b": b}, rng)


def check_clamp_alpha(rng):
    M = 20
    # one row inside the feasible region, one above each bound
    a = parameter(np.array([[0.4, 0.1], [0.5, 0.8], [1.3, -0.2]]) + 0.01 * rng.standard_normal((3, 2)), dtype=F64)
    return _op_check(lambda: attr.clamp_alpha_op(a, M), {"alpha": a}, rng)


def check_sampler(rng):
    M, D, L = 16, 3, 7
    frames = _p(rng, 2, M, D)
    alpha = parameter(np.column_stack([rng.uniform(0.3, 0.6, 2), rng.uniform(-0.3, 0.3, 2)]), dtype=F64)
    return _op_check(lambda: attr.sample_segment(frames, alpha, L), {"frames": frames, "alpha": alpha}, rng)


def check_anet(rng):
    M, D = 10, 3
    params = attr.init_anet(rng, M, D, hidden=6, dtype=F64)
    for p in params.values():
        p.data[...] = 0.5 * rng.standard_normal(p.shape)
    x = Tensor(rng.standard_normal((2, M, D)))
    seed = int(rng.integers(2**31))
    return _op_check(lambda: attr.anet_forward(params, x, 0.75, True, np.random.default_rng(seed)), params, rng)


def check_compress(rng):
    x, w = _p(rng, 2, 12, 3), _p(rng, 1, 4, 1)
    return _op_check(lambda: compress_content(x, w, 5), {"x": x, "w": w}, rng)


def check_attention(rng):
    params = init_attention(rng, 3, hidden=5, dtype=F64)
    for p in params.values():
        p.data[...] = 0.5 * rng.standard_normal(p.shape)
    x = _p(rng, 2, 6, 3)
    return _op_check(lambda: attention_forward(params, x)[0], {**params, "x": x}, rng)


def _small_model(variant: str, rng) -> BEACNet:
    spec = ModelSpec(variant, M=12, D=3, K=3, L=6, hidden=6, keep=0.75)
    model = BEACNet(spec, seed=int(rng.integers(2**31)), dtype=F64)
    for p in model.params.values():
        p.data[...] = 0.4 * rng.standard_normal(p.shape)
    return model


def _loss_check(variant: str, rng) -> GradCheckResult:
    from .training import joint_loss  # training imports this module's neighbours

    model = _small_model(variant, rng)
    M = model.spec.M
    frames = rng.standard_normal((2, M, 3))
    labels = rng.integers(0, 3, 2)
    seed = int(rng.integers(2**31))

    def loss(frozen=None):
        return joint_loss(model, frames, labels, spans, 0.6, True, np.random.default_rng(seed), frozen)

    spans = None
    if model.spec.supervised:
        # video 0: ground truth equal to the current prediction (gate open);
        # video 1: ground truth far away (gate closed)
        _, st = joint_loss(model, frames, labels, np.array([[1, 2], [1, 2]]), 0.6, True,
                           np.random.default_rng(seed))
        a1, a2 = attr.clamp_alpha(*st.routing[1].T, M)
        ts, te = attr.span_from_alpha(a1, a2, M)
        far = (1.0, 2.0) if ts[1] > M / 2 else (M - 1.0, float(M))
        spans = np.array([[ts[0], te[0]], far])
        _, st = loss()
        if list(st.routing[0]) != [True, False]:
            raise AssertionError(f"microbatch gates not mixed: {st.routing[0]}")
        frozen = st.routing
        return grad_check(lambda: loss(frozen)[0], model.params, max_entries=LOSS_ENTRIES, rng=rng)
    return grad_check(lambda: loss()[0], model.params, max_entries=LOSS_ENTRIES, rng=rng)


def check_loss_full(rng):
    return _loss_check("full", rng)


def check_loss_unsup(rng):
    return _loss_check("c_unsup_e", rng)


def check_loss_attention(rng):
    return _loss_check("attention", rng)


CHECKS: dict[str, Callable[[np.random.Generator], GradCheckResult]] = {
    "dense_affine": check_dense_affine,
    "conv2d_valid": check_conv2d,
    "conv2d_valid_strided": check_conv2d_strided,
    "relu": check_relu,
    "sigmoid_tanh": check_sigmoid_tanh,
    "softmax": check_softmax,
    "softmax_cross_entropy": check_softmax_cross_entropy,
    "dropout": check_dropout,
    "square_loss": check_square_loss,
    "weighted_sum": check_weighted_sum,
    "shape_ops": check_shape_ops,
    "clamp_alpha": check_clamp_alpha,
    "sample_segment": check_sampler,
    "anet_forward": check_anet,
    "compress_content": check_compress,
    "attention_pool": check_attention,
    "loss_full": check_loss_full,
    "loss_c_unsup_e": check_loss_unsup,
    "loss_attention": check_loss_attention,
}


def run_suite(seed: int = 0, n_seeds: int = 1) -> dict:
    """Run every check for seeds ``seed .. seed + n_seeds - 1``; report the worst error per check."""
    start = time.perf_counter()
    worst = {name: 0.0 for name in CHECKS}
    checked = kinks = 0
    for s in range(seed, seed + n_seeds):
        for i, (name, fn) in enumerate(CHECKS.items()):
            res = fn(np.random.default_rng([s, i]))
            worst[name] = max(worst[name], res.max_rel_error)
            checked += res.n_checked
            kinks += res.n_kinks
    return {
        "max_rel_error": max(worst.values()),
        "per_check": worst,
        "entries_checked": checked,
        "entries_at_kinks": kinks,
        "seeds": list(range(seed, seed + n_seeds)),
        "seconds": round(time.perf_counter() - start, 3),
    }
