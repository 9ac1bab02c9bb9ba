import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beacnet import baselines as bl
from beacnet.dataio import SynthConfig, generate_sequences
from beacnet.ndkernel import Tensor


# runs ----------------------------------------------------------------------


def test_longest_run_bridges_short_gaps():
    scores = np.array([1.0] * 5 + [0.0] * 3 + [1.0] * 5)
    assert bl.attribute_from_scores(scores, 0.5) == (1, 13)


def test_longest_run_keeps_first_run_when_gap_too_long():
    scores = np.array([1.0] * 5 + [0.0] * 11 + [1.0] * 2)
    assert bl.attribute_from_scores(scores, 0.5) == (1, 5)


def test_longest_run_ties_go_to_earliest():
    assert bl.longest_run(np.array([1, 1, 0, 1, 1], bool)) == (1, 2)
    assert bl.longest_run(np.zeros(4, bool)) is None


@given(st.lists(st.booleans(), min_size=1, max_size=40))
def test_longest_run_against_scan(mask):
    run = bl.longest_run(np.array(mask))
    best, cur, best_end = 0, 0, -1
    for i, m in enumerate(mask):
        cur = cur + 1 if m else 0
        if cur > best:
            best, best_end = cur, i
    if best == 0:
        assert run is None
    else:
        assert run == (best_end - best + 2, best_end + 1)


def test_no_frame_above_threshold_warns_and_covers_video():
    with pytest.warns(UserWarning, match="whole video"):
        assert bl.attribute_from_scores(np.zeros(7), 1.0) == (1, 7)


@pytest.mark.parametrize("run, M, span", [(None, 9, (1, 9)), ((3, 3), 9, (3, 4)), ((9, 9), 9, (8, 9)), ((2, 5), 9, (2, 5))])
def test_run_interval(run, M, span):
    assert bl.run_interval(run, M) == span


# ITE -----------------------------------------------------------------------


def test_ite_fit_on_exactly_n_points():
    pool = np.random.default_rng(0).standard_normal((4, 3))
    cb = bl.ite_fit(pool, n_clusters=4, k_nn=1)
    got = cb.centers[np.lexsort(cb.centers.T)]
    np.testing.assert_allclose(got, pool[np.lexsort(pool.T)], atol=1e-12)


def test_ite_fit_two_blobs():
    rng = np.random.default_rng(1)
    sigma = 0.1
    a = rng.normal([5, 0], sigma, (100, 2))
    b = rng.normal([0, 5], sigma, (100, 2))
    cb = bl.ite_fit(np.vstack([a, b]), n_clusters=2, k_nn=1)
    centers = cb.centers[np.argsort(cb.centers[:, 0])]
    assert np.linalg.norm(centers[1] - a.mean(0)) < sigma
    assert np.linalg.norm(centers[0] - b.mean(0)) < sigma


def test_ite_fit_is_seeded_and_rejects_degenerate_pool():
    pool = np.random.default_rng(2).standard_normal((50, 3))
    assert np.array_equal(bl.ite_fit(pool, 5, seed=3).centers, bl.ite_fit(pool, 5, seed=3).centers)
    with pytest.raises(ValueError, match="distinct"):
        bl.ite_fit(np.ones((10, 2)), 3)
    with pytest.raises(ValueError, match="smaller"):
        bl.ite_fit(pool[:2], 3)


def test_ite_codes_hand_computed():
    centers = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    frames = np.array([[1.0, 0.0], [1.0, 2.0]])
    cb = bl.ITECodebook(centers, k_nn=1)
    # frame 1 matches center 1 exactly; frame 2: cos to c3 = 3/sqrt(10) > 2/sqrt(5)
    expected = np.array([1.0, 0.0, 3 / np.sqrt(10)])
    np.testing.assert_allclose(bl.ite_encode(frames, cb), expected, rtol=1e-12)


def test_ite_codes_dense_when_k_equals_clusters():
    rng = np.random.default_rng(3)
    centers, frames = rng.standard_normal((4, 3)), rng.standard_normal((5, 3))
    cos = (frames / np.linalg.norm(frames, axis=1, keepdims=True)) @ (centers / np.linalg.norm(centers, axis=1, keepdims=True)).T
    np.testing.assert_allclose(bl.ite_encode(frames, bl.ITECodebook(centers, 4)), cos.sum(0), rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 6))
def test_ite_codes_have_k_nonzeros_per_frame(seed, k):
    rng = np.random.default_rng(seed)
    cb = bl.ITECodebook(rng.standard_normal((6, 4)), k)
    codes = bl.ite_frame_codes(rng.standard_normal((7, 4)), cb)
    assert np.all((codes != 0).sum(axis=1) == k)


def test_zero_frame_contributes_nothing():
    cb = bl.ITECodebook(np.eye(3), 2)
    assert not bl.ite_frame_codes(np.zeros((1, 3)), cb).any()


def test_identical_frames_attribute_whole_video():
    cb = bl.ITECodebook(np.eye(3), 1)
    assert bl.ite_attribute(np.tile([1.0, 2.0, 0.5], (9, 1)), cb) == (1, 9)


def test_codebook_validation():
    with pytest.raises(ValueError):
        bl.ITECodebook(np.eye(3), 4)
    with pytest.raises(ValueError):
        bl.ITECodebook(np.array([[np.nan, 0.0]]), 1)


# attention -----------------------------------------------------------------


def test_attention_weights_uniform_on_identical_frames():
    params = bl.init_attention(np.random.default_rng(0), 4, hidden=8, dtype=np.float64)
    frames = np.tile(np.random.default_rng(1).standard_normal(4), (2, 7, 1))
    pooled, w = bl.attention_forward(params, Tensor(frames))
    np.testing.assert_allclose(w.data, 1 / 7, rtol=1e-12)
    np.testing.assert_allclose(pooled.data, frames[:, 0], rtol=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_attention_weights_form_distribution(seed):
    rng = np.random.default_rng(seed)
    params = bl.init_attention(rng, 3, hidden=8, dtype=np.float64)
    _, w = bl.attention_forward(params, Tensor(5 * rng.standard_normal((3, 6, 3))))
    assert np.all(w.data > 0)
    np.testing.assert_allclose(w.data.sum(axis=1), 1.0, rtol=1e-12)


# frame vote ----------------------------------------------------------------


def test_vote_examples():
    A, B = 0, 1
    assert bl.vote(np.array([A, A, B, A, A, A]), 2) == (A, (4, 6))
    assert bl.vote(np.array([2, 1, 1, 2]), 3)[0] == 1  # tie -> lowest index
    assert bl.vote(np.array([-1, 1, -1]), 2) == (1, (2, 2))


def test_framevote_zero_noise_is_exact():
    cfg = SynthConfig(classes=4, per_class=8, dim=16, frames=20, seg_min=4, seg_max=10, sigma=0.0, seed=4)
    seqs = generate_sequences(cfg)
    frames = np.stack([s.frames for s in seqs]).astype(np.float64)
    labels = np.array([s.label for s in seqs])
    model = bl.FrameVoteBaseline().fit(frames, labels)
    pred, conf, spans = model.predict(frames)
    assert np.array_equal(pred, labels)
    assert spans.tolist() == [list(s.span) for s in seqs]
    assert np.all((conf > 0) & (conf <= 1))


def test_uniform_summary():
    assert bl.uniform_summary(10, 4) == [1, 4, 7, 10]
    assert bl.uniform_summary(3, 6) == [1, 2, 3]
    with pytest.raises(ValueError):
        bl.uniform_summary(10, 1)
