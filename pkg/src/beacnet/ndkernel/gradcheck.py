"""Central-difference gradient checking."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Mapping

import numpy as np

from .tensor import Tensor

# Below this magnitude gradients are compared in absolute terms: central
# differences carry round-off of order eps * |f| / h regardless of the true value.
ERROR_FLOOR = 1e-5


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = ERROR_FLOOR) -> np.ndarray:
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


@dataclass
class GradCheckResult:
    max_rel_error: float
    n_checked: int
    n_kinks: int  # entries skipped because a non-differentiable point lies within +-h


def numerical_gradient(
    f: Callable[[], Tensor],
    p: Tensor,
    h: float = 1e-5,
    entries: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Central differences of the scalar ``f()`` with respect to entries of ``p``.

    Returns the gradient estimate and the second difference ``f(+h) - 2f + f(-h)``
    per entry. ``entries`` restricts the work to those flat indices (others stay 0).
    """
    grad = np.zeros_like(p.data)
    second = np.zeros_like(p.data)
    flat = p.data.reshape(-1)
    out, out2 = grad.reshape(-1), second.reshape(-1)
    f0 = float(f().data)
    for i in range(flat.size) if entries is None else entries:
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f().data)
        flat[i] = orig - h
        fm = float(f().data)
        flat[i] = orig
        out[i] = (fp - fm) / (2.0 * h)
        out2[i] = fp - 2.0 * f0 + fm
    return grad, second


def grad_check(
    f: Callable[[], Tensor],
    params: Iterable[Tensor] | Mapping[str, Tensor],
    h: float = 1e-5,
    max_entries: int | None = None,
    rng: np.random.Generator | None = None,
    kink_tol: float = 1e-3,
) -> GradCheckResult:
    """Compare reverse-mode gradients of ``f`` with central differences.

    ``f`` must rebuild the graph from ``params`` on every call and be
    deterministic (fix any dropout rng inside it). Run in float64.

    An entry whose one-sided slopes differ by more than ``kink_tol`` straddles
    a kink (ReLU at zero, a frame boundary in the sampler); its central
    difference is not a derivative, so it is skipped and counted.
    With ``max_entries``, larger tensors are checked on a random subset.
    """
    plist = list(params.values()) if isinstance(params, Mapping) else list(params)
    for p in plist:
        if p.data.dtype != np.float64:
            raise TypeError("grad_check requires float64 parameters")
        p.grad = None
    f().backward()
    worst, checked, kinks = 0.0, 0, 0
    for p in plist:
        analytic = p.grad if p.grad is not None else np.zeros_like(p.data)
        if max_entries is not None and p.data.size > max_entries:
            rng = rng if rng is not None else np.random.default_rng(0)
            entries = np.sort(rng.choice(p.data.size, max_entries, replace=False))
        else:
            entries = np.arange(p.data.size)
        numeric, second = numerical_gradient(f, p, h, entries)
        smooth = np.abs(second.reshape(-1)[entries]) / h <= kink_tol
        err = relative_error(analytic.reshape(-1)[entries], numeric.reshape(-1)[entries])
        kinks += int((~smooth).sum())
        checked += int(smooth.sum())
        if smooth.any():
            worst = max(worst, float(err[smooth].max()))
    return GradCheckResult(worst, checked, kinks)
