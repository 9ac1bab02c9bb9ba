"""Emotion-oriented keyframe selection by min-cost dynamic programming.

A summary is a strictly increasing list of 1-based frame indices that starts
at frame 1, ends at frame M, never skips more than ``k_max`` frames between
neighbours, keeps the feature-space diameter of every covered stretch within
``d_max`` and holds at most ``t_max`` frames. Frames inside the emotional
span cost 1, all others 2; the summary minimises the total cost.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np


class InfeasibleError(ValueError):
    """No summary satisfies the constraints."""

    def __init__(self, message: str, pair: tuple[int, int] | None = None):
        super().__init__(message)
        self.pair = pair


@dataclass
class SummarizationConfig:
    k_max: int
    d_max: float
    t_max: int
    span: tuple[int, int] | None = None  # emotional frames, 1-based inclusive

    def __post_init__(self):
        if self.k_max < 1:
            raise ValueError(f"k_max must be >= 1, got {self.k_max}")
        if not self.d_max > 0:
            raise ValueError(f"d_max must be > 0, got {self.d_max}")
        if self.t_max < 2:
            raise ValueError(f"t_max must be >= 2, got {self.t_max}")


@dataclass
class SummaryPlan:
    frames: list[int]
    cost: float
    diameters: list[float] = field(default_factory=list)

    def to_json(self) -> dict:
        return {"frames": self.frames, "cost": self.cost}


def frame_costs(M: int, span: tuple[int, int] | None) -> np.ndarray:
    """Cost of each frame 1..M: 1 inside the span, 2 elsewhere (all 2 without a span)."""
    cost = np.full(M, 2.0)
    if span is not None:
        a, b = span
        cost[max(a, 1) - 1 : min(b, M)] = 1.0
    return cost


def frame_cost(i: int, span: tuple[int, int] | None) -> int:
    return 1 if span is not None and span[0] <= i <= span[1] else 2


def as_frames(frames) -> np.ndarray:
    """(M, D) float64 view; a 1-D input is M frames of one feature."""
    x = np.asarray(frames, dtype=np.float64)
    return x[:, None] if x.ndim == 1 else x


def segment_diameter(frames: np.ndarray, a: int, b: int) -> float:
    """Largest Euclidean distance between any two frames in [a, b] (1-based, inclusive)."""
    x = as_frames(frames)[a - 1 : b]
    if len(x) < 2:
        return 0.0
    diff = x[:, None, :] - x[None, :, :]
    return float(np.sqrt((diff * diff).sum(-1)).max())


def window_diameters(frames: np.ndarray, k_max: int) -> np.ndarray:
    """``diam[g, i]`` = diameter of frames i..i+g (0-based start), for gaps g <= k_max.

    Built from the identity diam[i, j] = max(diam[i, j-1], diam[i+1, j], d(i, j)).
    Entries whose window runs past the end are +inf.
    """
    x = as_frames(frames)
    M = len(x)
    K = min(k_max, M - 1)
    diam = np.full((K + 1, M), np.inf)
    diam[0] = 0.0
    for g in range(1, K + 1):
        n = M - g
        step = x[g:] - x[:n]
        d = np.sqrt((step * step).sum(axis=1))
        diam[g, :n] = np.maximum(np.maximum(diam[g - 1, :n], diam[g - 1, 1 : n + 1]), d)
    return diam


def _first_bad_pair(frames: np.ndarray, d_max: float) -> tuple[int, int] | None:
    x = as_frames(frames)
    d = np.sqrt(((x[1:] - x[:-1]) ** 2).sum(axis=1))
    bad = np.flatnonzero(d > d_max)
    return (int(bad[0]) + 1, int(bad[0]) + 2) if bad.size else None


def _check_feasible(frames: np.ndarray, cfg: SummarizationConfig) -> None:
    pair = _first_bad_pair(frames, cfg.d_max)
    if pair is not None:
        raise InfeasibleError(
            f"frames {pair[0]} and {pair[1]} are farther apart than d_max={cfg.d_max}", pair
        )


def _infeasible_length(M: int, cfg: SummarizationConfig) -> InfeasibleError:
    return InfeasibleError(
        f"no summary of at most {cfg.t_max} frames covers {M} frames with k_max={cfg.k_max} and d_max={cfg.d_max}"
    )


def _plan(frames: np.ndarray, picks: list[int], cost: np.ndarray) -> SummaryPlan:
    diam = [segment_diameter(frames, a, b) for a, b in zip(picks, picks[1:])]
    return SummaryPlan(picks, float(cost[np.asarray(picks) - 1].sum()), diam)


def dp_summarize(frames: np.ndarray, cfg: SummarizationConfig) -> SummaryPlan:
    """Exact minimum-cost summary in O(M * k_max * t_max) after diameter precomputation.

    ``best[t, h]`` is the least cost of a summary whose t-th frame is h,
    charging every selected frame except h itself; the final frame's own
    cost is added once at the end.
    """
    x = as_frames(frames)
    M = len(x)
    if M < 2:
        raise ValueError("summarization needs at least two frames")
    _check_feasible(x, cfg)
    cost = frame_costs(M, cfg.span)
    diam = window_diameters(x, cfg.k_max)
    K = diam.shape[0] - 1
    T = min(cfg.t_max, M)
    best = np.full((T + 1, M), np.inf)
    back = np.zeros((T + 1, M), dtype=np.int64)
    best[1, 0] = 0.0
    # step_cost[g, h]: charge for stepping from h-g to h (inf when the stretch is too wide)
    step_cost = np.full((K + 1, M), np.inf)
    for g in range(1, K + 1):
        ok = diam[g, : M - g] <= cfg.d_max
        step_cost[g, g:] = np.where(ok, cost[: M - g], np.inf)
    for t in range(2, T + 1):
        prev = best[t - 1]
        cur = np.full(M, np.inf)
        arg = np.zeros(M, dtype=np.int64)
        for g in range(1, K + 1):
            cand = np.full(M, np.inf)
            cand[g:] = prev[: M - g] + step_cost[g, g:]
            better = cand < cur
            cur = np.where(better, cand, cur)
            arg = np.where(better, np.arange(M) - g, arg)
        best[t], back[t] = cur, arg
    finals = best[1:, M - 1]
    if not np.isfinite(finals).any():
        raise _infeasible_length(M, cfg)
    t = int(np.argmin(finals)) + 1  # fewest frames among optimal lengths
    picks = [M - 1]
    for tt in range(t, 1, -1):
        picks.append(int(back[tt, picks[-1]]))
    picks = [p + 1 for p in reversed(picks)]
    plan = _plan(x, picks, cost)
    assert plan.cost == best[t, M - 1] + cost[M - 1]
    return plan


BRUTE_FORCE_MAX_FRAMES = 14


def brute_force_summarize(frames: np.ndarray, cfg: SummarizationConfig) -> SummaryPlan:
    """Enumerate every subset containing the first and last frame (M <= 14)."""
    x = as_frames(frames)
    M = len(x)
    if M > BRUTE_FORCE_MAX_FRAMES:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_MAX_FRAMES} frames, got {M}")
    if M < 2:
        raise ValueError("summarization needs at least two frames")
    _check_feasible(x, cfg)
    cost = frame_costs(M, cfg.span)
    dist = np.sqrt(((x[:, None, :] - x[None, :, :]) ** 2).sum(-1))
    diam = {(a, b): dist[a - 1 : b, a - 1 : b].max() for a in range(1, M + 1) for b in range(a, M + 1)}
    best_key = None
    best_picks = None
    for r in range(0, M - 1):
        for inner in itertools.combinations(range(2, M), r):
            picks = [1, *inner, M]
            if len(picks) > cfg.t_max:
                continue
            if any(b - a > cfg.k_max for a, b in zip(picks, picks[1:])):
                continue
            if any(diam[a, b] > cfg.d_max for a, b in zip(picks, picks[1:])):
                continue
            key = (float(cost[np.asarray(picks) - 1].sum()), len(picks), picks)
            if best_key is None or key < best_key:
                best_key, best_picks = key, picks
    if best_picks is None:
        raise _infeasible_length(M, cfg)
    return _plan(x, best_picks, cost)


def check_plan(frames: np.ndarray, plan: SummaryPlan, cfg: SummarizationConfig) -> list[str]:
    """Independent constraint audit; returns the list of violations (empty when valid)."""
    x = as_frames(frames)
    M = len(x)
    h = plan.frames
    problems = []
    if not h or h[0] != 1 or h[-1] != M:
        problems.append("summary must start at frame 1 and end at the last frame")
    if any(b <= a for a, b in zip(h, h[1:])):
        problems.append("frames not strictly increasing")
    if len(h) > cfg.t_max:
        problems.append(f"{len(h)} frames exceed t_max={cfg.t_max}")
    for a, b in zip(h, h[1:]):
        if b - a > cfg.k_max:
            problems.append(f"gap {a}->{b} exceeds k_max={cfg.k_max}")
        # pairwise scan, independent of the solver's incremental diameters
        seg = x[a - 1 : b]
        for i in range(len(seg)):
            for j in range(i + 1, len(seg)):
                if np.linalg.norm(seg[i] - seg[j]) > cfg.d_max:
                    problems.append(f"segment {a}->{b} diameter exceeds d_max={cfg.d_max}")
                    break
            else:
                continue
            break
    expected = sum(frame_cost(i, cfg.span) for i in h)
    if expected != plan.cost:
        problems.append(f"reported cost {plan.cost} != recomputed {expected}")
    return problems


def emotion_coverage(picks: list[int], span: tuple[int, int]) -> float:
    """Fraction of selected frames lying inside ``span``."""
    return sum(span[0] <= p <= span[1] for p in picks) / len(picks)


def random_instance(rng: np.random.Generator, max_frames: int = 12) -> tuple[np.ndarray, SummarizationConfig]:
    """Random-walk features with constraints drawn so that most instances are feasible."""
    M = int(rng.integers(3, max_frames + 1))
    D = int(rng.choice([1, 2, 4]))
    frames = np.cumsum(rng.standard_normal((M, D)), axis=0)
    steps = np.linalg.norm(np.diff(frames, axis=0), axis=1)
    d_max = float(steps.max() * rng.uniform(0.9, 3.0))
    span = None
    if rng.random() < 0.8:
        a = int(rng.integers(1, M))
        span = (a, int(rng.integers(a + 1, M + 1)))
    cfg = SummarizationConfig(int(rng.integers(1, 6)), d_max, int(rng.integers(2, M + 1)), span)
    return frames, cfg


def oracle_trials(trials: int = 200, seed: int = 1, max_frames: int = 12) -> dict:
    """Compare the DP against exhaustive search on random instances."""
    rng = np.random.default_rng(seed)
    mismatches, infeasible, violations = [], 0, 0
    for trial in range(trials):
        frames, cfg = random_instance(rng, max_frames)
        results = []
        for solver in (dp_summarize, brute_force_summarize):
            try:
                results.append(solver(frames, cfg))
            except InfeasibleError:
                results.append(None)
        dp, bf = results
        if (dp is None) != (bf is None) or (dp is not None and dp.cost != bf.cost):
            mismatches.append(trial)
        if dp is None:
            infeasible += 1
        elif check_plan(frames, dp, cfg):
            violations += 1
            mismatches.append(trial)
    return {"trials": trials, "seed": seed, "mismatches": sorted(set(mismatches)),
            "infeasible": infeasible, "constraint_violations": violations}
