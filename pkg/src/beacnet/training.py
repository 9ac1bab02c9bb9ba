"""tIoU-gated joint training of A-Net and C-Net."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import attribution as attr
from .classification import classification_loss
from .metrics import accuracy, map_at_tiou, tiou_arrays
from .ndkernel import Adam, NonFiniteGradientError, Tensor, ops
from .network import BEACNet, ModelSpec

log = logging.getLogger(__name__)

CLASSIFICATION, ATTRIBUTION = "classification", "attribution"


class DivergenceError(FloatingPointError):
    pass


@dataclass
class TrainConfig:
    beta: float = 0.6
    epochs: int = 200
    batch_size: int = 32
    lr: float = 1e-3
    L: int = 20
    keep: float = 0.75
    hidden: int = 128
    alpha_init: tuple[float, float] = (0.5, 0.0)
    ablation: str = "full"
    repeats: int = 5
    seed: int = 0
    dtype: str = "float32"

    def validate(self) -> None:
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if self.epochs < 1 or self.batch_size < 1 or self.repeats < 1:
            raise ValueError("epochs, batch_size and repeats must be >= 1")
        if not 0.0 < self.keep <= 1.0:
            raise ValueError(f"keep must lie in (0, 1], got {self.keep}")
        a1, a2 = self.alpha_init
        if not (0.0 < a1 < 1.0 and -1.0 < a2 < 1.0):
            raise ValueError(f"alpha_init {self.alpha_init} outside the A-Net output range")


class Dataset(NamedTuple):
    frames: np.ndarray  # (N, M, D)
    labels: np.ndarray  # (N,)
    spans: np.ndarray | None  # (N, 2) 1-based frame times
    ids: list[str] | None = None

    def subset(self, idx) -> "Dataset":
        return Dataset(self.frames[idx], self.labels[idx],
                       None if self.spans is None else self.spans[idx],
                       None if self.ids is None else [self.ids[i] for i in np.asarray(idx)])

    @classmethod
    def from_manifest(cls, manifest) -> "Dataset":
        frames, labels, spans = manifest.load_arrays()
        return cls(frames, labels, spans, [e.id for e in manifest.entries])


@dataclass
class StepStats:
    loss: float
    loss_attr: float  # mean L^A over examples routed to A-Net
    loss_cls: float   # mean L^C over examples routed to C-Net
    n_attr: int
    n_cls: int
    # gate decisions and the (detached) alpha fed to the sampler, supervised variants only
    routing: tuple[np.ndarray, np.ndarray] | None = None


@dataclass
class TrainResult:
    model: BEACNet
    log: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    best_val_accuracy: float = float("nan")


def gate(o, beta: float):
    """Route each example: classification iff its tIoU reaches ``beta``."""
    return np.where(np.asarray(o) >= beta, CLASSIFICATION, ATTRIBUTION)


def predicted_spans(alpha: np.ndarray, M: int) -> np.ndarray:
    a1, a2 = attr.clamp_alpha(alpha[:, 0], alpha[:, 1], M)
    return np.stack(attr.span_from_alpha(a1, a2, M), axis=1)


def joint_loss(model: BEACNet, frames: np.ndarray, labels: np.ndarray, spans: np.ndarray | None,
               beta: float, train: bool = True, rng: np.random.Generator | None = None,
               frozen: tuple[np.ndarray, np.ndarray] | None = None):
    """Per-example gated loss of one minibatch, averaged over the batch.

    Supervised variants compute the tIoU gate from the current forward pass;
    examples at or above ``beta`` contribute cross-entropy through C-Net
    only (A-Net output is detached before sampling), the others contribute
    the alpha square loss through A-Net only. Unsupervised variants train on
    cross-entropy alone.

    ``frozen`` replaces the gate decisions and the sampler's alpha with given
    values; gradient checks use it to hold stop-gradient inputs constant.
    """
    spec = model.spec
    N, M, _ = frames.shape
    x = Tensor(frames.astype(model.dtype, copy=False))
    terms = []
    la = lc = 0.0
    n_attr = n_cls = 0
    if spec.supervised:
        if spans is None:
            raise ValueError("supervised training needs ground-truth spans for every example")
        alpha_raw = model.alpha(x, train, rng)
        if frozen is None:
            sampled = attr.clamp_alpha_op(alpha_raw, M).data
            pred = np.stack(attr.span_from_alpha(sampled[:, 0], sampled[:, 1], M), axis=1)
            open_ = tiou_arrays(pred[:, 0], pred[:, 1], spans[:, 0], spans[:, 1]) >= beta
        else:
            open_, sampled = frozen
        closed = np.flatnonzero(~open_)
        opened = np.flatnonzero(open_)
        if closed.size:
            target = np.stack(attr.alpha_from_span(spans[closed, 0], spans[closed, 1], M), axis=1)
            per = attr.attribution_loss(ops.index_rows(alpha_raw, closed), target)
            terms.append(ops.sum(per))
            la, n_attr = float(per.data.mean()), closed.size
        if opened.size:
            xo = Tensor(x.data[opened])
            alpha_fixed = Tensor(sampled[opened])
            per = classification_loss(model.probs(xo, alpha_fixed, train, rng), labels[opened])
            terms.append(ops.sum(per))
            lc, n_cls = float(per.data.mean()), opened.size
    else:
        alpha = attr.clamp_alpha_op(model.alpha(x, train, rng), M) if spec.has_anet else None
        per = classification_loss(model.probs(x, alpha, train, rng), labels)
        terms.append(ops.sum(per))
        lc, n_cls = float(per.data.mean()), N
    total = terms[0] if len(terms) == 1 else ops.add(terms[0], terms[1])
    loss = ops.mul(total, 1.0 / N)
    routing = (open_, sampled) if spec.supervised else None
    return loss, StepStats(float(loss.data), la, lc, n_attr, n_cls, routing)


def build_model(cfg: TrainConfig, M: int, D: int, K: int, seed: int | None = None) -> BEACNet:
    spec = ModelSpec(cfg.ablation, M=M, D=D, K=K, L=cfg.L, hidden=cfg.hidden, keep=cfg.keep)
    model = BEACNet(spec, seed=cfg.seed if seed is None else seed, dtype=np.dtype(cfg.dtype))
    if spec.has_anet and tuple(cfg.alpha_init) != (0.5, 0.0):
        a1, a2 = cfg.alpha_init
        model.params["anet.fc2.b"].data[:] = (np.log(a1 / (1.0 - a1)), np.arctanh(a2))
    return model


def evaluate_model(model: BEACNet, data: Dataset, threshold: float = 0.5) -> tuple[float, float | None, float | None]:
    """Macro accuracy and, for attributing models with labelled spans, mAP at ``threshold`` and mean tIoU."""
    probs, spans, _ = model.predict(data.frames)
    pred = probs.argmax(axis=1)
    acc = accuracy(pred, data.labels, model.spec.K)
    if spans is None or data.spans is None:
        return acc, None, None
    _, means = map_at_tiou(spans, probs.max(axis=1), pred, data.spans, data.labels,
                           model.spec.K, (threshold,), data.ids)
    overlap = tiou_arrays(spans[:, 0], spans[:, 1], data.spans[:, 0], data.spans[:, 1])
    return acc, means[threshold], float(overlap.mean())


def train(train_data: Dataset, val_data: Dataset | None, cfg: TrainConfig, num_classes: int | None = None,
          model: BEACNet | None = None, seed: int | None = None) -> TrainResult:
    """Adam over shuffled minibatches; keeps the parameters with the best validation accuracy."""
    cfg.validate()
    seed = cfg.seed if seed is None else seed
    N, M, D = train_data.frames.shape
    K = num_classes if num_classes is not None else int(train_data.labels.max()) + 1
    if model is None:
        model = build_model(cfg, M, D, K, seed)
    opt = Adam(model.params, lr=cfg.lr)
    order_rng = np.random.default_rng([seed, 1])
    drop_rng = np.random.default_rng([seed, 2])
    result = TrainResult(model)
    best_state = model.state_dict()
    best_acc = (-1.0, -1.0, -1.0)
    for epoch in range(1, cfg.epochs + 1):
        order = order_rng.permutation(N)
        sums = np.zeros(4)
        for b, start in enumerate(range(0, N, cfg.batch_size)):
            idx = order[start : start + cfg.batch_size]
            batch = train_data.subset(idx)
            opt.zero_grad()
            loss, st = joint_loss(model, batch.frames, batch.labels, batch.spans, cfg.beta, True, drop_rng)
            if not np.isfinite(st.loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}, batch {b}")
            loss.backward()
            try:
                opt.step()
            except NonFiniteGradientError as exc:
                raise DivergenceError(f"epoch {epoch}, batch {b}: {exc}") from exc
            bad = [k for k, v in model.params.items() if not np.isfinite(v.data).all()]
            if bad:
                raise DivergenceError(f"non-finite parameters {bad[:3]} after epoch {epoch}, batch {b}")
            sums += (st.loss_attr * st.n_attr, st.loss_cls * st.n_cls, st.n_attr, st.n_cls)
        row = {
            "epoch": epoch,
            "loss_attr": sums[0] / sums[2] if sums[2] else 0.0,
            "loss_cls": sums[1] / sums[3] if sums[3] else 0.0,
            "gate_open": sums[3] / N if model.spec.supervised else 1.0,
        }
        row["train_acc"] = evaluate_model(model, train_data)[0]
        if val_data is not None:
            row["val_acc"], row["val_map50"], row["val_tiou"] = evaluate_model(model, val_data)
            score = (row["val_acc"], row["val_map50"] or 0.0, row["val_tiou"] or 0.0)
        else:
            row["val_acc"], row["val_map50"], row["val_tiou"] = None, None, None
            score = (row["train_acc"], 0.0, 0.0)
        # best validation accuracy; ties resolved by validation mAP, then mean tIoU
        if score > best_acc:
            best_acc, best_state, result.best_epoch = score, model.state_dict(), epoch
        result.log.append(row)
        log.debug("epoch %d %s", epoch, row)
    model.load_state_dict(best_state)
    result.best_val_accuracy = best_acc[0]
    return result


def finetune(model: BEACNet, data: Dataset, cfg: TrainConfig, epochs: int = 10,
             val_data: Dataset | None = None, seed: int | None = None) -> TrainResult:
    """Continue training a pretrained model on a small set with a fresh optimizer state."""
    N, M, D = data.frames.shape
    K = int(data.labels.max()) + 1
    spec = model.spec
    if (spec.M, spec.D) != (M, D) or K > spec.K:
        raise ValueError(
            f"checkpoint expects M={spec.M}, D={spec.D}, K={spec.K}; data has M={M}, D={D}, K>={K}"
        )
    sub = TrainConfig(**{**cfg.__dict__, "epochs": epochs, "ablation": spec.variant,
                         "L": spec.L, "hidden": spec.hidden, "keep": spec.keep})
    return train(data, val_data, sub, spec.K, model=model, seed=seed)


LOG_FIELDS = ("epoch", "loss_attr", "loss_cls", "gate_open", "train_acc", "val_acc", "val_map50", "val_tiou")


def write_log(path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(LOG_FIELDS)
        for r in rows:
            w.writerow(["" if r.get(k) is None else (f"{r[k]:.6f}" if isinstance(r[k], float) else r[k])
                        for k in LOG_FIELDS])
