"""Feature sequences on disk, dataset manifests and the synthetic generator.

FSEQ layout (little-endian)::

    b"FSEQ" | u8 version=1 | u32 M | u32 D | M*D float32, row-major

Manifests are JSON lines ``{"id", "path", "label", "span": [t_s, t_e]}``
with 1-based inclusive frame indices; ``path`` is relative to the manifest.
"""
from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

EMOTIONS = ("anger", "surprise", "fear", "joy", "sadness", "disgust")

FSEQ_MAGIC = b"FSEQ"
FSEQ_VERSION = 1
FSEQ_HEADER = struct.Struct("<4sBII")


class FormatError(ValueError):
    pass


class BadMagicError(FormatError):
    pass


class UnsupportedVersionError(FormatError):
    pass


class TruncatedFileError(FormatError):
    pass


@dataclass
class FeatureSequence:
    id: str
    frames: np.ndarray  # (M, D)
    label: int = 0
    span: tuple[int, int] | None = None

    def __post_init__(self):
        if self.frames.ndim != 2 or self.frames.shape[0] < 2:
            raise ValueError(f"frames must be (M>=2, D), got {self.frames.shape}")
        if self.span is not None:
            ts, te = self.span
            if not (1 <= ts < te <= self.frames.shape[0]):
                raise ValueError(f"span {self.span} invalid for M={self.frames.shape[0]}")

    @property
    def M(self) -> int:
        return self.frames.shape[0]


def save_fseq(path, frames: np.ndarray) -> None:
    frames = np.asarray(frames)
    M, D = frames.shape
    body = np.ascontiguousarray(frames, dtype="<f4").tobytes()
    Path(path).write_bytes(FSEQ_HEADER.pack(FSEQ_MAGIC, FSEQ_VERSION, M, D) + body)


def load_fseq(path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if len(blob) < 4 or blob[:4] != FSEQ_MAGIC:
        raise BadMagicError(f"{path}: not an FSEQ file")
    if len(blob) < FSEQ_HEADER.size:
        raise TruncatedFileError(f"{path}: truncated header")
    _, version, M, D = FSEQ_HEADER.unpack_from(blob)
    if version != FSEQ_VERSION:
        raise UnsupportedVersionError(f"{path}: unsupported FSEQ version {version}")
    expected = FSEQ_HEADER.size + 4 * M * D
    if len(blob) != expected:
        raise TruncatedFileError(f"{path}: expected {expected} bytes, found {len(blob)}")
    return np.frombuffer(blob, dtype="<f4", offset=FSEQ_HEADER.size).reshape(M, D).astype(np.float32)


@dataclass
class ManifestEntry:
    id: str
    path: str
    label: int
    span: tuple[int, int] | None = None

    def to_json(self) -> dict:
        d = {"id": self.id, "path": self.path, "label": self.label}
        if self.span is not None:
            d["span"] = list(self.span)
        return d


@dataclass
class Manifest:
    entries: list[ManifestEntry]
    root: Path = field(default_factory=Path)

    def __len__(self) -> int:
        return len(self.entries)

    def resolve(self, entry: ManifestEntry) -> Path:
        return self.root / entry.path

    def labels(self) -> np.ndarray:
        return np.array([e.label for e in self.entries], dtype=np.int64)

    def load(self, entry: ManifestEntry) -> FeatureSequence:
        return FeatureSequence(entry.id, load_fseq(self.resolve(entry)), entry.label,
                               tuple(entry.span) if entry.span else None)

    def load_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray | None]:
        """Stack all sequences into ``(N, M, D)`` frames, labels and ``(N, 2)`` spans."""
        frames = np.stack([load_fseq(self.resolve(e)) for e in self.entries])
        spans = None
        if all(e.span is not None for e in self.entries):
            spans = np.array([e.span for e in self.entries], dtype=np.float64)
        return frames, self.labels(), spans


def read_manifest(path) -> Manifest:
    path = Path(path)
    entries = []
    seen = set()
    for line in path.read_text().splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        if obj["id"] in seen:
            raise FormatError(f"{path}: duplicate id {obj['id']!r}")
        seen.add(obj["id"])
        span = tuple(obj["span"]) if obj.get("span") is not None else None
        entries.append(ManifestEntry(obj["id"], obj["path"], int(obj["label"]), span))
    manifest = Manifest(entries, path.parent)
    for e in entries:
        if not manifest.resolve(e).exists():
            raise FileNotFoundError(f"{path}: missing feature file {e.path}")
    return manifest


def write_manifest(path, entries: Iterable[ManifestEntry]) -> None:
    lines = [json.dumps(e.to_json(), sort_keys=True) for e in entries]
    Path(path).write_text("\n".join(lines) + "\n")


def split_dataset(
    manifest: Manifest,
    fractions: Sequence[float] = (0.7, 0.15, 0.15),
    seed: int = 0,
) -> tuple[Manifest, Manifest, Manifest]:
    """Stratified train/val/test split, deterministic in ``seed``."""
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"split fractions must be three numbers summing to 1, got {fractions}")
    rng = np.random.default_rng(seed)
    parts: list[list[ManifestEntry]] = [[], [], []]
    by_class: dict[int, list[ManifestEntry]] = {}
    for e in manifest.entries:
        by_class.setdefault(e.label, []).append(e)
    for label in sorted(by_class):
        items = by_class[label]
        if len(items) < 3:
            raise ValueError(f"class {label} has {len(items)} items; need at least 3 to split")
        order = rng.permutation(len(items))
        n_train = int(round(fractions[0] * len(items)))
        n_val = int(round(fractions[1] * len(items)))
        n_train = min(max(n_train, 1), len(items) - 2)
        n_val = min(max(n_val, 1), len(items) - n_train - 1)
        cuts = (n_train, n_train + n_val)
        for idx, i in enumerate(order):
            part = 0 if idx < cuts[0] else (1 if idx < cuts[1] else 2)
            parts[part].append(items[i])
    return tuple(Manifest(sorted(p, key=lambda e: e.id), manifest.root) for p in parts)


def resample_frames(seq: FeatureSequence, target: int) -> FeatureSequence:
    """Uniform index sampling down to ``target`` frames, zero padding up to it."""
    if target < 2:
        raise ValueError(f"target length must be >= 2, got {target}")
    M, D = seq.frames.shape
    if M == target:
        return seq
    if M > target:
        idx = np.floor(np.arange(target) * M / target).astype(int)
        frames = seq.frames[idx]
    else:
        frames = np.concatenate([seq.frames, np.zeros((target - M, D), seq.frames.dtype)])
    span = None
    if seq.span is not None:
        scale = target / M if M > target else 1.0
        ts = int(np.clip(round(seq.span[0] * scale), 1, target))
        te = int(np.clip(round(seq.span[1] * scale), 1, target))
        if te <= ts:
            te = min(ts + 1, target)
            ts = te - 1
        span = (ts, te)
    return FeatureSequence(seq.id, frames, seq.label, span)


@dataclass
class SynthConfig:
    classes: int = 6
    per_class: int = 600
    dim: int = 4096
    frames: int = 30
    seg_min: int = 6
    seg_max: int = 15
    separation: float = 4.0
    sigma: float = 1.0
    # context (neutral) frames may be noisier than the emotional segment
    context_sigma: float | None = None
    seed: int = 0

    def validate(self) -> None:
        if not (2 <= self.seg_min <= self.seg_max <= self.frames):
            raise ValueError(
                f"segment range [{self.seg_min}, {self.seg_max}] infeasible for {self.frames} frames"
            )
        if self.sigma < 0 or (self.context_sigma is not None and self.context_sigma < 0):
            raise ValueError("noise sigma must be non-negative")
        if self.classes < 1 or self.per_class < 1 or self.dim < 1:
            raise ValueError("classes, per_class and dim must be positive")


def prototypes(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    """Neutral prototype (row 0) and one prototype per class.

    With ``dim > classes`` the prototypes are scaled orthonormal vectors, so
    every pair sits exactly ``separation`` apart.
    """
    n = cfg.classes + 1
    if cfg.dim >= n:
        q, _ = np.linalg.qr(rng.standard_normal((cfg.dim, n)))
        return (cfg.separation / np.sqrt(2.0)) * q.T
    raw = rng.standard_normal((n, cfg.dim))
    return cfg.separation * raw / np.linalg.norm(raw, axis=1, keepdims=True)


def generate_sequences(cfg: SynthConfig) -> list[FeatureSequence]:
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    protos = prototypes(cfg, rng)
    ctx_sigma = cfg.sigma if cfg.context_sigma is None else cfg.context_sigma
    out = []
    for label in range(cfg.classes):
        for j in range(cfg.per_class):
            length = int(rng.integers(cfg.seg_min, cfg.seg_max + 1))
            start = int(rng.integers(1, cfg.frames - length + 2))
            end = start + length - 1
            frames = protos[0] + ctx_sigma * rng.standard_normal((cfg.frames, cfg.dim))
            frames[start - 1 : end] = protos[label + 1] + cfg.sigma * rng.standard_normal((length, cfg.dim))
            out.append(FeatureSequence(f"c{label}_{j:05d}", frames.astype(np.float32), label, (start, end)))
    return out


def gen_synthetic(cfg: SynthConfig, out_dir, split_seed: int | None = None) -> Manifest:
    """Write features, ``manifest.jsonl`` and stratified ``train/val/test.jsonl``."""
    out_dir = Path(out_dir)
    (out_dir / "features").mkdir(parents=True, exist_ok=True)
    entries = []
    for seq in generate_sequences(cfg):
        rel = f"features/{seq.id}.fseq"
        save_fseq(out_dir / rel, seq.frames)
        entries.append(ManifestEntry(seq.id, rel, seq.label, seq.span))
    write_manifest(out_dir / "manifest.jsonl", entries)
    manifest = Manifest(entries, out_dir)
    splits = split_dataset(manifest, seed=cfg.seed if split_seed is None else split_seed)
    for name, part in zip(("train", "val", "test"), splits):
        write_manifest(out_dir / f"{name}.jsonl", part.entries)
    (out_dir / "synth_config.json").write_text(json.dumps(asdict(cfg), indent=2, sort_keys=True) + "\n")
    return manifest


def load_split(data_dir, name: str) -> Manifest:
    return read_manifest(Path(data_dir) / f"{name}.jsonl")
