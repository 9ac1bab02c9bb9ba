"""Comparison methods: image transfer encoding, temporal attention, frame voting."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.cluster import KMeans
from sklearn.linear_model import LogisticRegression

from .ndkernel import Tensor, ops, parameter
from .ndkernel.init import xavier_uniform

# ---------------------------------------------------------------------------
# runs of frames


def longest_run(mask: np.ndarray, max_gap: int = 0) -> tuple[int, int] | None:
    """Longest stretch of True frames, bridging False gaps of at most ``max_gap``.

    Returns 1-based inclusive ``(first, last)`` or ``None`` when nothing is set.
    Ties go to the earliest stretch.
    """
    idx = np.flatnonzero(np.asarray(mask, dtype=bool))
    if idx.size == 0:
        return None
    best = (idx[0], idx[0])
    start = prev = idx[0]
    for i in idx[1:]:
        if i - prev - 1 > max_gap:
            start = i
        prev = i
        if prev - start > best[1] - best[0]:
            best = (start, prev)
    return int(best[0]) + 1, int(best[1]) + 1


def run_interval(run: tuple[int, int] | None, M: int) -> tuple[int, int]:
    """Turn a frame run into a span with end > start; ``None`` means the whole video."""
    if run is None:
        return 1, M
    a, b = run
    if b > a:
        return a, b
    return (a, a + 1) if a < M else (a - 1, a)


# ---------------------------------------------------------------------------
# image transfer encoding


@dataclass
class ITECodebook:
    centers: np.ndarray  # (n_clusters, D)
    k_nn: int = 5

    def __post_init__(self):
        if not np.all(np.isfinite(self.centers)):
            raise ValueError("codebook centers must be finite")
        if not (1 <= self.k_nn <= len(self.centers)):
            raise ValueError(f"k_nn={self.k_nn} must lie in [1, {len(self.centers)}]")


def ite_fit(pool: np.ndarray, n_clusters: int = 256, k_nn: int = 5, seed: int = 0) -> ITECodebook:
    """k-means (k-means++ seeding, at most 100 Lloyd iterations) over a pool of frame features."""
    pool = np.asarray(pool, dtype=np.float64)
    if len(pool) < n_clusters:
        raise ValueError(f"pool of {len(pool)} frames is smaller than n_clusters={n_clusters}")
    if len(np.unique(pool, axis=0)) < n_clusters:
        raise ValueError(f"pool has fewer than n_clusters={n_clusters} distinct points")
    km = KMeans(n_clusters=n_clusters, init="k-means++", n_init=1, max_iter=100, tol=1e-4,
                random_state=seed)
    km.fit(pool)
    return ITECodebook(km.cluster_centers_, k_nn)


def _cosine(frames: np.ndarray, centers: np.ndarray) -> np.ndarray:
    fn = np.linalg.norm(frames, axis=1, keepdims=True)
    cn = np.linalg.norm(centers, axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        sim = (frames @ centers.T) / (fn * cn.T)
    return np.where((fn > 0) & (cn.T > 0), sim, 0.0)


def ite_frame_codes(frames: np.ndarray, codebook: ITECodebook) -> np.ndarray:
    """Per-frame codes: cosine similarity to each of the frame's k nearest centers, zero elsewhere."""
    sim = _cosine(np.asarray(frames, dtype=np.float64), codebook.centers)
    # stable sort on -sim: ties at the k-th neighbour go to the lower center index
    nearest = np.argsort(-sim, axis=1, kind="stable")[:, : codebook.k_nn]
    codes = np.zeros_like(sim)
    rows = np.arange(len(sim))[:, None]
    codes[rows, nearest] = sim[rows, nearest]
    return codes


def ite_encode(frames: np.ndarray, codebook: ITECodebook) -> np.ndarray:
    return ite_frame_codes(frames, codebook).sum(axis=0)


def ite_frame_scores(frames: np.ndarray, codebook: ITECodebook) -> np.ndarray:
    codes = ite_frame_codes(frames, codebook)
    video = codes.sum(axis=0, keepdims=True)
    return _cosine(codes, video)[:, 0]


def attribute_from_scores(scores: np.ndarray, threshold: float | None = None, max_gap: int = 10) -> tuple[int, int]:
    """Longest run of frames scoring at or above ``threshold`` (default: the mean score)."""
    scores = np.asarray(scores, dtype=np.float64)
    thr = scores.mean() if threshold is None else threshold
    run = longest_run(scores >= thr, max_gap)
    if run is None:
        warnings.warn("no frame reaches the attribution threshold; using the whole video", stacklevel=2)
    return run_interval(run, len(scores))


def ite_attribute(frames: np.ndarray, codebook: ITECodebook, threshold: float | None = None,
                  max_gap: int = 10) -> tuple[int, int]:
    return attribute_from_scores(ite_frame_scores(frames, codebook), threshold, max_gap)


def ite_summarize(frames: np.ndarray, codebook: ITECodebook, n_frames: int) -> list[int]:
    """The ``n_frames`` frames most similar to the video representation, in temporal order."""
    scores = ite_frame_scores(frames, codebook)
    top = np.argsort(-scores, kind="stable")[:n_frames]
    return sorted(int(i) + 1 for i in top)


class ITEBaseline:
    def __init__(self, n_clusters: int = 256, k_nn: int = 5, threshold: float | None = None, seed: int = 0):
        self.n_clusters, self.k_nn, self.threshold, self.seed = n_clusters, k_nn, threshold, seed

    def fit(self, frames: np.ndarray, labels: np.ndarray) -> "ITEBaseline":
        N, M, D = frames.shape
        self.codebook = ite_fit(frames.reshape(N * M, D), self.n_clusters, self.k_nn, self.seed)
        enc = np.stack([ite_encode(f, self.codebook) for f in frames])
        self.clf = LogisticRegression(max_iter=2000).fit(enc, labels)
        return self

    def predict(self, frames: np.ndarray):
        """Per video: predicted label, its probability, attributed span."""
        enc = np.stack([ite_encode(f, self.codebook) for f in frames])
        probs = self.clf.predict_proba(enc)
        spans = np.array([ite_attribute(f, self.codebook, self.threshold) for f in frames])
        return self.clf.classes_[probs.argmax(axis=1)], probs.max(axis=1), spans


# ---------------------------------------------------------------------------
# temporal attention


def init_attention(rng: np.random.Generator, D: int, hidden: int = 128, dtype=np.float32) -> dict[str, Tensor]:
    return {
        "attn.fc1.W": parameter(xavier_uniform(rng, D, hidden, (D, hidden), dtype), "attn.fc1.W"),
        "attn.fc1.b": parameter(np.zeros(hidden, dtype), "attn.fc1.b"),
        "attn.fc2.W": parameter(xavier_uniform(rng, hidden, hidden, (hidden, hidden), dtype), "attn.fc2.W"),
        "attn.fc2.b": parameter(np.zeros(hidden, dtype), "attn.fc2.b"),
        "attn.score.W": parameter(xavier_uniform(rng, hidden, 1, (hidden, 1), dtype), "attn.score.W"),
        "attn.score.b": parameter(np.zeros(1, dtype), "attn.score.b"),
    }


def attention_forward(params: dict[str, Tensor], frames: Tensor) -> tuple[Tensor, Tensor]:
    """Softmax-over-time pooling: returns the pooled (N, D) features and (N, M) weights."""
    N, M, D = frames.shape
    h = ops.relu(ops.dense_affine(frames, params["attn.fc1.W"], params["attn.fc1.b"]))
    h = ops.relu(ops.dense_affine(h, params["attn.fc2.W"], params["attn.fc2.b"]))
    scores = ops.reshape(ops.dense_affine(h, params["attn.score.W"], params["attn.score.b"]), (N, M))
    weights = ops.softmax(scores, axis=-1)
    return ops.weighted_sum(weights, frames), weights


# ---------------------------------------------------------------------------
# frame voting


class FrameVoteBaseline:
    """Linear softmax classifier on single frames, video label by majority vote.

    A frame whose top probability stays below ``2/K`` abstains, so frames the
    classifier cannot tell apart (e.g. neutral context) do not swamp the vote.
    """

    def __init__(self, seed: int = 0):
        self.seed = seed

    def fit(self, frames: np.ndarray, labels: np.ndarray) -> "FrameVoteBaseline":
        N, M, D = frames.shape
        self.K = int(labels.max()) + 1
        self.clf = LogisticRegression(max_iter=2000).fit(frames.reshape(N * M, D), np.repeat(labels, M))
        return self

    def frame_votes(self, frames: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        probs = self.clf.predict_proba(frames)
        votes = np.where(probs.max(axis=1) >= 2.0 / self.K, probs.argmax(axis=1), -1)
        return votes, probs

    def predict(self, frames: np.ndarray):
        """Per video: voted label, mean frame probability of that label, attributed span."""
        N, M, _ = frames.shape
        labels = np.zeros(N, dtype=np.int64)
        conf = np.zeros(N)
        spans = np.zeros((N, 2), dtype=np.int64)
        for i, f in enumerate(frames):
            votes, probs = self.frame_votes(f)
            labels[i], run = vote(votes, self.K)
            conf[i] = probs[:, labels[i]].mean()
            spans[i] = run_interval(run, M)
        return labels, conf, spans


def vote(votes: np.ndarray, K: int) -> tuple[int, tuple[int, int] | None]:
    """Majority class (lowest index on ties, -1 votes ignored) and its longest run."""
    counts = np.bincount(votes[votes >= 0], minlength=K)
    winner = int(np.argmax(counts))
    return winner, longest_run(votes == winner)


# ---------------------------------------------------------------------------
# summary baselines


def uniform_summary(M: int, n_frames: int) -> list[int]:
    """Evenly spaced frames including the first and the last."""
    if n_frames < 2:
        raise ValueError("a summary keeps at least the first and last frames")
    return sorted({int(np.floor(x + 0.5)) for x in np.linspace(1, M, min(n_frames, M))})


def score_summary(frames: np.ndarray, n_frames: int) -> list[int]:
    """Frames most similar (cosine) to the mean frame, in temporal order."""
    scores = _cosine(np.asarray(frames, dtype=np.float64), np.asarray(frames, dtype=np.float64).mean(axis=0, keepdims=True))[:, 0]
    top = np.argsort(-scores, kind="stable")[:n_frames]
    return sorted(int(i) + 1 for i in top)
