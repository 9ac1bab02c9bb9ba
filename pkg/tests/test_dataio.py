import json
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from beacnet.dataio import (
    BadMagicError,
    FeatureSequence,
    FormatError,
    ManifestEntry,
    SynthConfig,
    TruncatedFileError,
    UnsupportedVersionError,
    gen_synthetic,
    generate_sequences,
    load_fseq,
    load_split,
    prototypes,
    read_manifest,
    resample_frames,
    save_fseq,
    split_dataset,
    write_manifest,
)

HEADER = 4 + 1 + 4 + 4


@settings(max_examples=40, deadline=None)
@given(arrays(np.float32, st.tuples(st.integers(1, 20), st.integers(1, 9)),
              elements=st.floats(-1e6, 1e6, width=32, allow_nan=False)))
def test_fseq_round_trip_is_bit_exact(tmp_path_factory, frames):
    path = tmp_path_factory.mktemp("f") / "x.fseq"
    save_fseq(path, frames)
    back = load_fseq(path)
    assert back.dtype == np.float32
    assert back.tobytes() == frames.tobytes()


def test_fseq_layout(tmp_path):
    frames = np.arange(6, dtype=np.float32).reshape(2, 3)
    save_fseq(tmp_path / "a.fseq", frames)
    blob = (tmp_path / "a.fseq").read_bytes()
    assert blob[:5] == b"FSEQ\x01"
    assert struct.unpack("<II", blob[5:13]) == (2, 3)
    assert np.frombuffer(blob[13:], "<f4").tolist() == [0, 1, 2, 3, 4, 5]


def test_fseq_file_size_full_scale_dimensions(tmp_path):
    save_fseq(tmp_path / "big.fseq", np.zeros((100, 4096), np.float32))
    assert (tmp_path / "big.fseq").stat().st_size == HEADER + 100 * 4096 * 4


def test_fseq_errors_are_distinct(tmp_path):
    save_fseq(tmp_path / "ok.fseq", np.ones((3, 2), np.float32))
    blob = (tmp_path / "ok.fseq").read_bytes()
    cases = {
        BadMagicError: b"FSEX" + blob[4:],
        UnsupportedVersionError: blob[:4] + b"\x02" + blob[5:],
        TruncatedFileError: blob[:-1],
    }
    for err, data in cases.items():
        (tmp_path / "bad.fseq").write_bytes(data)
        with pytest.raises(err):
            load_fseq(tmp_path / "bad.fseq")
    (tmp_path / "short.fseq").write_bytes(b"FSEQ\x01\x00")
    with pytest.raises(TruncatedFileError):
        load_fseq(tmp_path / "short.fseq")
    assert issubclass(BadMagicError, FormatError)


def test_feature_sequence_validates_span():
    with pytest.raises(ValueError):
        FeatureSequence("a", np.zeros((10, 2)), 0, (5, 5))
    with pytest.raises(ValueError):
        FeatureSequence("a", np.zeros((10, 2)), 0, (0, 4))
    FeatureSequence("a", np.zeros((10, 2)), 0, (1, 10))


# manifests -----------------------------------------------------------------


def _manifest(tmp_path, n_per_class=60, classes=6):
    entries = []
    (tmp_path / "f").mkdir(exist_ok=True)
    for k in range(classes):
        for j in range(n_per_class):
            rel = f"f/{k}_{j}.fseq"
            save_fseq(tmp_path / rel, np.zeros((4, 2), np.float32))
            entries.append(ManifestEntry(f"{k}_{j:03d}", rel, k, (1, 3)))
    write_manifest(tmp_path / "m.jsonl", entries)
    return read_manifest(tmp_path / "m.jsonl")


def test_manifest_round_trip_with_relative_paths(tmp_path):
    m = _manifest(tmp_path, 2, 2)
    assert [e.id for e in m.entries] == ["0_000", "0_001", "1_000", "1_001"]
    first = json.loads((tmp_path / "m.jsonl").read_text().splitlines()[0])
    assert first == {"id": "0_000", "label": 0, "path": "f/0_0.fseq", "span": [1, 3]}
    frames, labels, spans = m.load_arrays()
    assert frames.shape == (4, 4, 2) and labels.tolist() == [0, 0, 1, 1]
    assert spans.tolist() == [[1, 3]] * 4


def test_manifest_rejects_duplicates_and_missing_files(tmp_path):
    save_fseq(tmp_path / "a.fseq", np.zeros((3, 1), np.float32))
    line = json.dumps({"id": "x", "path": "a.fseq", "label": 0})
    (tmp_path / "dup.jsonl").write_text(line + "\n" + line + "\n")
    with pytest.raises(FormatError, match="duplicate"):
        read_manifest(tmp_path / "dup.jsonl")
    (tmp_path / "miss.jsonl").write_text(json.dumps({"id": "y", "path": "nope.fseq", "label": 0}) + "\n")
    with pytest.raises(FileNotFoundError, match="nope.fseq"):
        read_manifest(tmp_path / "miss.jsonl")


def test_split_counts_per_class(tmp_path):
    m = _manifest(tmp_path)
    train, val, test = split_dataset(m, seed=3)
    assert (len(train), len(val), len(test)) == (252, 54, 54)
    for part, n in ((train, 42), (val, 9), (test, 9)):
        assert np.bincount(part.labels()).tolist() == [n] * 6


def test_split_is_deterministic_partition(tmp_path):
    m = _manifest(tmp_path, 10, 3)
    a = split_dataset(m, seed=1)
    b = split_dataset(m, seed=1)
    assert [[e.id for e in p.entries] for p in a] == [[e.id for e in p.entries] for p in b]
    ids = [e.id for p in a for e in p.entries]
    assert sorted(ids) == sorted(e.id for e in m.entries) and len(set(ids)) == len(ids)
    c = split_dataset(m, seed=2)
    assert [e.id for e in c[0].entries] != [e.id for e in a[0].entries]


def test_split_needs_three_per_class(tmp_path):
    with pytest.raises(ValueError, match="at least 3"):
        split_dataset(_manifest(tmp_path, 2, 2))


# resampling ----------------------------------------------------------------


def test_resample_identity_and_padding():
    seq = FeatureSequence("a", np.ones((50, 3), np.float32), 0, (10, 20))
    assert resample_frames(seq, 50) is seq
    up = resample_frames(seq, 100)
    assert up.frames.shape == (100, 3)
    assert np.all(up.frames[50:] == 0) and np.all(up.frames[:50] == 1)
    assert up.span == (10, 20)


def test_resample_down_rescales_span():
    seq = FeatureSequence("a", np.arange(400, dtype=np.float32).reshape(200, 2), 0, (40, 120))
    down = resample_frames(seq, 100)
    assert down.span == (20, 60)
    np.testing.assert_array_equal(down.frames[:, 0], np.arange(0, 400, 4))


# synthetic generator ------------------------------------------------------


def test_prototypes_are_equidistant():
    cfg = SynthConfig(classes=6, dim=64, separation=6.0)
    p = prototypes(cfg, np.random.default_rng(0))
    d = np.linalg.norm(p[:, None] - p[None], axis=-1)
    off = d[~np.eye(7, dtype=bool)]
    np.testing.assert_allclose(off, 6.0, rtol=1e-12)


def test_zero_noise_segment_frames_equal_prototype():
    cfg = SynthConfig(classes=3, per_class=4, dim=8, frames=20, sigma=0.0, seed=5)
    protos = prototypes(cfg, np.random.default_rng(cfg.seed)).astype(np.float32)
    for seq in generate_sequences(cfg):
        a, b = seq.span
        assert np.all(seq.frames[a - 1 : b] == protos[seq.label + 1])
        outside = np.delete(seq.frames, np.arange(a - 1, b), axis=0)
        assert np.all(outside == protos[0])


def test_generator_counts_and_span_lengths():
    cfg = SynthConfig(classes=6, per_class=60, dim=16, frames=30, seg_min=6, seg_max=15)
    seqs = generate_sequences(cfg)
    assert len(seqs) == 360
    assert np.bincount([s.label for s in seqs]).tolist() == [60] * 6
    lengths = [s.span[1] - s.span[0] + 1 for s in seqs]
    assert min(lengths) >= 6 and max(lengths) <= 15
    assert all(1 <= s.span[0] and s.span[1] <= 30 for s in seqs)


def test_nearest_prototype_on_segment_means_is_perfect():
    cfg = SynthConfig(classes=6, per_class=10, dim=64, separation=6.0, sigma=1.0, seed=2)
    protos = prototypes(cfg, np.random.default_rng(cfg.seed))
    seqs = generate_sequences(cfg)
    sample = [seqs[i] for i in np.random.default_rng(0).choice(len(seqs), 50, replace=False)]
    for s in sample:
        mean = s.frames[s.span[0] - 1 : s.span[1]].mean(axis=0)
        assert np.argmin(np.linalg.norm(protos[1:] - mean, axis=1)) == s.label


def test_gen_synthetic_writes_splits(tmp_path):
    cfg = SynthConfig(classes=3, per_class=10, dim=4, frames=12, seg_min=3, seg_max=6)
    gen_synthetic(cfg, tmp_path)
    assert json.loads((tmp_path / "synth_config.json").read_text())["per_class"] == 10
    sizes = [len(load_split(tmp_path, s)) for s in ("train", "val", "test")]
    # 10 per class -> 7 / 2 / 1
    assert sizes == [21, 6, 3]


def test_gen_synthetic_is_byte_deterministic(tmp_path):
    cfg = SynthConfig(classes=2, per_class=5, dim=3, frames=10, seg_min=2, seg_max=5, seed=9)
    gen_synthetic(cfg, tmp_path / "a")
    gen_synthetic(cfg, tmp_path / "b")
    for f in sorted((tmp_path / "a").rglob("*")):
        if f.is_file():
            assert f.read_bytes() == (tmp_path / "b" / f.relative_to(tmp_path / "a")).read_bytes()


@pytest.mark.parametrize("bad", [dict(seg_min=1), dict(seg_min=8, seg_max=6), dict(seg_max=40), dict(sigma=-1.0)])
def test_synth_config_validation(bad):
    with pytest.raises(ValueError):
        SynthConfig(frames=30, **bad).validate()
