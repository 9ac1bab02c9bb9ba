"""End-to-end jobs shared by the command line and the experiment scripts."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import baselines
from .dataio import Manifest, load_split, read_manifest
from .metrics import DEFAULT_THRESHOLDS, EvalReport, evaluate
from .ndkernel import Tensor
from .network import BEACNet
from .training import Dataset, TrainConfig, build_model, train

WORKERS_ENV = "BEACNET_WORKERS"


def default_workers() -> int:
    value = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(value)
    except ValueError as exc:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer, got {value!r}") from exc
    if n < 1:
        raise ValueError(f"{WORKERS_ENV} must be a positive integer, got {value!r}")
    return n


def load_manifest(path, split: str = "test") -> Manifest:
    """A manifest file, or the named split inside a generated data directory."""
    path = Path(path)
    return load_split(path, split) if path.is_dir() else read_manifest(path)


def load_dataset(path, split: str = "test") -> Dataset:
    return Dataset.from_manifest(load_manifest(path, split))


def num_classes(*datasets: Dataset) -> int:
    return int(max(d.labels.max() for d in datasets if d is not None)) + 1


def _train_one(args):
    train_data, val_data, cfg, K, seed = args
    res = train(train_data, val_data, replace(cfg, seed=seed), K)
    return res.model.state_dict(), res.log, res.best_epoch, res.best_val_accuracy


def train_repeats(train_data: Dataset, val_data: Dataset | None, cfg: TrainConfig, K: int,
                  seeds, workers: int | None = None) -> list[tuple[BEACNet, list[dict], int, float]]:
    """Train one model per seed; results do not depend on the worker count."""
    seeds = list(seeds)
    workers = default_workers() if workers is None else workers
    jobs = [(train_data, val_data, cfg, K, s) for s in seeds]
    if workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(seeds))) as pool:
            raw = list(pool.map(_train_one, jobs))
    else:
        raw = [_train_one(j) for j in jobs]
    out = []
    for seed, (state, log, best_epoch, best_acc) in zip(seeds, raw):
        model = build_from_state(cfg, train_data, K, state, seed)
        out.append((model, log, best_epoch, best_acc))
    return out


def build_from_state(cfg: TrainConfig, data: Dataset, K: int, state: dict, seed: int) -> BEACNet:
    _, M, D = data.frames.shape
    model = build_model(replace(cfg, seed=seed), M, D, K, seed)
    model.load_state_dict(state)
    return model


def model_report(model: BEACNet, data: Dataset, thresholds=DEFAULT_THRESHOLDS, method: str | None = None) -> EvalReport:
    probs, spans, _ = model.predict(data.frames)
    pred = probs.argmax(axis=1)
    if spans is None and model.spec.variant == "attention":
        spans = attention_spans(model, data.frames)
    return evaluate(pred, probs.max(axis=1), data.labels, model.spec.K, spans, data.spans,
                    thresholds, data.ids, method or model.spec.variant)


def attention_spans(model: BEACNet, frames: np.ndarray) -> np.ndarray:
    """Longest run of frames whose attention weight exceeds the uniform weight 1/M."""
    _, weights = baselines.attention_forward(model.params, Tensor(np.asarray(frames, model.dtype)))
    M = frames.shape[1]
    return np.array([baselines.run_interval(baselines.longest_run(w > 1.0 / M), M) for w in weights.data])


def baseline_report(method: str, train_data: Dataset, test_data: Dataset, K: int,
                    thresholds=DEFAULT_THRESHOLDS, seed: int = 0, n_clusters: int = 256,
                    k_nn: int = 5, threshold: float | None = None) -> EvalReport:
    if method == "ite":
        model = baselines.ITEBaseline(n_clusters, k_nn, threshold, seed).fit(train_data.frames, train_data.labels)
    elif method == "framevote":
        model = baselines.FrameVoteBaseline(seed).fit(train_data.frames, train_data.labels)
    else:
        raise ValueError(f"unknown baseline {method!r}")
    labels, conf, spans = model.predict(test_data.frames)
    return evaluate(labels, conf, test_data.labels, K, spans, test_data.spans, thresholds,
                    test_data.ids, method)


def stratified_fraction(data: Dataset, fraction: float, seed: int) -> Dataset:
    """A per-class random subset holding ``fraction`` of each class (at least one item)."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    rng = np.random.default_rng(seed)
    keep = []
    for k in np.unique(data.labels):
        idx = np.flatnonzero(data.labels == k)
        n = max(1, int(round(fraction * idx.size)))
        keep.extend(np.sort(rng.choice(idx, n, replace=False)))
    return data.subset(np.sort(np.asarray(keep)))
