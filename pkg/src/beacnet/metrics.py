"""tIoU, average precision, mAP over tIoU thresholds and macro accuracy."""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

DEFAULT_THRESHOLDS = tuple(round(0.1 * i, 1) for i in range(1, 8))


@dataclass(frozen=True)
class Interval:
    start: float
    end: float

    def __post_init__(self):
        if not self.end > self.start:
            raise ValueError(f"interval needs end > start, got [{self.start}, {self.end}]")

    @property
    def length(self) -> float:
        return self.end - self.start


def tiou(a: Interval, b: Interval) -> float:
    inter = max(0.0, min(a.end, b.end) - max(a.start, b.start))
    union = max(a.end, b.end) - min(a.start, b.start) if inter > 0 else a.length + b.length
    return inter / union


def tiou_arrays(a_start, a_end, b_start, b_end) -> np.ndarray:
    """Elementwise tIoU of interval arrays (intervals given as start/end arrays)."""
    a_start, a_end, b_start, b_end = (np.asarray(v, dtype=np.float64) for v in (a_start, a_end, b_start, b_end))
    inter = np.clip(np.minimum(a_end, b_end) - np.maximum(a_start, b_start), 0.0, None)
    union = (a_end - a_start) + (b_end - b_start) - inter
    return inter / union


def average_precision(confidences: Sequence[float], correct: Sequence[bool], n_positives: int) -> float:
    """Uninterpolated AP: mean of precision at each correct hit, over ``n_positives``.

    Predictions are ranked by descending confidence; equal confidences keep
    the order they were given in.
    """
    conf = np.asarray(confidences, dtype=np.float64)
    hit = np.asarray(correct, dtype=bool)
    if conf.size == 0:
        raise ValueError("average_precision needs at least one prediction")
    if conf.shape != hit.shape:
        raise ValueError("confidences and correctness flags differ in length")
    if n_positives < 1:
        raise ValueError("average_precision needs at least one ground-truth positive")
    order = np.argsort(-conf, kind="stable")
    hit = hit[order]
    ranks = np.arange(1, hit.size + 1)
    precision_at = np.cumsum(hit) / ranks
    return float(precision_at[hit].sum() / n_positives)


def accuracy(predicted: Sequence[int], labels: Sequence[int], num_classes: int | None = None) -> float:
    """Macro accuracy: mean over present classes of per-class accuracy."""
    pred = np.asarray(predicted)
    lab = np.asarray(labels)
    if lab.size == 0:
        raise ValueError("accuracy of an empty prediction set is undefined")
    per = per_class_accuracy(pred, lab, num_classes)
    return float(np.nanmean(per))


def per_class_accuracy(predicted, labels, num_classes: int | None = None) -> np.ndarray:
    pred = np.asarray(predicted)
    lab = np.asarray(labels)
    K = int(num_classes if num_classes is not None else max(pred.max(), lab.max()) + 1)
    out = np.full(K, np.nan)
    for k in range(K):
        m = lab == k
        if m.any():
            out[k] = (pred[m] == k).mean()
    return out


def confusion_matrix(predicted, labels, num_classes: int) -> np.ndarray:
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(labels), np.asarray(predicted)), 1)
    return cm


def _ranked(ids: Sequence[str], conf: np.ndarray) -> np.ndarray:
    # descending confidence, ties by id
    return np.lexsort((np.asarray(ids), -conf))


def map_at_tiou(
    pred_spans: np.ndarray,
    confidences: np.ndarray,
    pred_labels: np.ndarray,
    gt_spans: np.ndarray,
    gt_labels: np.ndarray,
    num_classes: int,
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
    ids: Sequence[str] | None = None,
) -> tuple[dict[float, list[float | None]], dict[float, float]]:
    """Per-class AP and class-mean AP at each tIoU threshold.

    Each video contributes one detection: its predicted span, tagged with its
    predicted class and ranked by classifier confidence. A detection is
    correct when the class matches and the tIoU reaches the threshold.
    """
    pred_spans = np.asarray(pred_spans, dtype=np.float64)
    gt_spans = np.asarray(gt_spans, dtype=np.float64)
    conf = np.asarray(confidences, dtype=np.float64)
    pred_labels = np.asarray(pred_labels)
    gt_labels = np.asarray(gt_labels)
    if ids is None:
        ids = [f"{i:08d}" for i in range(len(conf))]
    overlap = tiou_arrays(pred_spans[:, 0], pred_spans[:, 1], gt_spans[:, 0], gt_spans[:, 1])
    order = _ranked(ids, conf)
    per_class: dict[float, list[float | None]] = {}
    means: dict[float, float] = {}
    missing = [k for k in range(num_classes) if not (gt_labels == k).any()]
    if missing:
        warnings.warn(f"classes {missing} absent from ground truth; excluded from mAP", stacklevel=2)
    for tau in thresholds:
        aps: list[float | None] = []
        for k in range(num_classes):
            n_pos = int((gt_labels == k).sum())
            if n_pos == 0:
                aps.append(None)
                continue
            sel = order[pred_labels[order] == k]
            if sel.size == 0:
                aps.append(0.0)
                continue
            correct = (gt_labels[sel] == k) & (overlap[sel] >= tau)
            # sel is already ranked; equal confidences keep id order
            aps.append(average_precision(-np.arange(sel.size, dtype=np.float64), correct, n_pos))
        per_class[tau] = aps
        present = [a for a in aps if a is not None]
        means[tau] = float(np.mean(present)) if present else float("nan")
    return per_class, means


@dataclass
class EvalReport:
    num_classes: int
    accuracy: float
    per_class_accuracy: list[float]
    confusion: list[list[int]]
    thresholds: list[float] = field(default_factory=lambda: list(DEFAULT_THRESHOLDS))
    ap: dict[str, list[float | None]] | None = None
    map: dict[str, float] | None = None
    method: str = ""

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "num_classes": self.num_classes,
            "accuracy": self.accuracy,
            "per_class_accuracy": self.per_class_accuracy,
            "confusion": self.confusion,
            "thresholds": self.thresholds,
            "ap": self.ap,
            "map": self.map,
        }

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["threshold", *[f"ap_{k}" for k in range(self.num_classes)], "map"])
            if self.map is None:
                return
            for tau in self.thresholds:
                key = f"{tau:.1f}"
                row = ["" if a is None else f"{a:.6f}" for a in self.ap[key]]
                w.writerow([key, *row, f"{self.map[key]:.6f}"])


def evaluate(
    pred_labels: np.ndarray,
    confidences: np.ndarray,
    gt_labels: np.ndarray,
    num_classes: int,
    pred_spans: np.ndarray | None = None,
    gt_spans: np.ndarray | None = None,
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
    ids: Sequence[str] | None = None,
    method: str = "",
) -> EvalReport:
    per = per_class_accuracy(pred_labels, gt_labels, num_classes)
    report = EvalReport(
        num_classes=num_classes,
        accuracy=float(np.nanmean(per)),
        per_class_accuracy=[None if np.isnan(v) else float(v) for v in per],
        confusion=confusion_matrix(pred_labels, gt_labels, num_classes).tolist(),
        thresholds=[float(t) for t in thresholds],
        method=method,
    )
    if pred_spans is not None and gt_spans is not None:
        ap, means = map_at_tiou(pred_spans, confidences, pred_labels, gt_spans, gt_labels,
                                num_classes, thresholds, ids)
        report.ap = {f"{t:.1f}": v for t, v in ap.items()}
        report.map = {f"{t:.1f}": v for t, v in means.items()}
    return report
