import itertools
import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beacnet.metrics import (
    DEFAULT_THRESHOLDS,
    Interval,
    accuracy,
    average_precision,
    evaluate,
    map_at_tiou,
    tiou,
    tiou_arrays,
)

intervals = st.tuples(st.floats(0, 100), st.floats(0.01, 50)).map(lambda t: Interval(t[0], t[0] + t[1]))


@pytest.mark.parametrize("a, b, expected", [((20, 60), (20, 60), 1.0), ((0, 10), (20, 30), 0.0), ((20, 60), (40, 80), 1 / 3)])
def test_tiou_examples(a, b, expected):
    assert tiou(Interval(*a), Interval(*b)) == pytest.approx(expected, abs=1e-15)


@given(intervals, intervals)
def test_tiou_properties(a, b):
    v = tiou(a, b)
    assert 0.0 <= v <= 1.0
    assert v == pytest.approx(tiou(b, a))
    assert v == pytest.approx(tiou_arrays(a.start, a.end, b.start, b.end))
    assert tiou(a, a) == 1.0


def test_interval_validation():
    with pytest.raises(ValueError):
        Interval(3, 3)


@pytest.mark.parametrize("flags, n_pos, ap", [([1, 1, 1], 3, 1.0), ([0, 0], 2, 0.0), ([1, 0, 1], 2, (1 + 2 / 3) / 2)])
def test_average_precision_examples(flags, n_pos, ap):
    conf = np.linspace(1, 0, len(flags))
    assert average_precision(conf, np.array(flags, bool), n_pos) == pytest.approx(ap, abs=1e-15)


def test_average_precision_errors():
    with pytest.raises(ValueError):
        average_precision([], [], 1)
    with pytest.raises(ValueError):
        average_precision([0.5], [True], 0)


@given(st.lists(st.tuples(st.integers(0, 50), st.booleans()), min_size=1, max_size=20),
       st.floats(0.1, 10), st.floats(-5, 5))
def test_average_precision_depends_only_on_rank(pairs, scale, shift):
    conf = np.array([c / 50 for c, _ in pairs])
    hit = np.array([h for _, h in pairs])
    n = max(1, int(hit.sum()))
    base = average_precision(conf, hit, n)
    # a strictly increasing map keeps both the ranking and the ties
    assert average_precision(np.exp(conf) * scale + shift, hit, n) == pytest.approx(base, abs=1e-12)
    assert 0.0 <= base <= 1.0


def _brute_force_ap(conf, correct, n_pos):
    # enumerate cut-offs: precision at each rank where a hit occurs
    order = sorted(range(len(conf)), key=lambda i: -conf[i])
    total = 0.0
    for r in range(1, len(order) + 1):
        if correct[order[r - 1]]:
            total += sum(correct[order[i]] for i in range(r)) / r
    return total / n_pos


def test_three_video_toy_case():
    gt_spans = np.array([[1, 10], [5, 15], [20, 30]])
    pred_spans = np.array([[1, 10], [12, 20], [21, 30]])
    labels = np.array([0, 0, 0])
    conf = np.array([0.9, 0.8, 0.7])
    _, means = map_at_tiou(pred_spans, conf, labels, gt_spans, labels, 1, (0.5,))
    overlaps = [tiou(Interval(*p), Interval(*g)) for p, g in zip(pred_spans, gt_spans)]
    expected = _brute_force_ap(conf, [o >= 0.5 for o in overlaps], 3)
    assert means[0.5] == pytest.approx(expected, abs=1e-15)
    assert expected == pytest.approx((1 + 2 / 3) / 3)


def _random_problem(rng, n=30, K=3):
    gt_labels = rng.integers(0, K, n)
    gt_labels[:K] = np.arange(K)
    pred_labels = np.where(rng.random(n) < 0.7, gt_labels, rng.integers(0, K, n))
    gs = rng.integers(1, 20, n)
    gt = np.stack([gs, gs + rng.integers(2, 10, n)], 1)
    ps = gs + rng.integers(-4, 5, n)
    pred = np.stack([ps, ps + rng.integers(2, 10, n)], 1)
    return pred, rng.random(n), pred_labels, gt, gt_labels, K


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_map_non_increasing_and_bounded(seed):
    pred, conf, pl, gt, gl, K = _random_problem(np.random.default_rng(seed))
    _, means = map_at_tiou(pred, conf, pl, gt, gl, K)
    vals = [means[t] for t in DEFAULT_THRESHOLDS]
    assert all(a >= b for a, b in zip(vals, vals[1:]))
    assert all(0.0 <= v <= 1.0 for v in vals)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_map_matches_brute_force_per_class(seed):
    pred, conf, pl, gt, gl, K = _random_problem(np.random.default_rng(seed), n=8)
    per, means = map_at_tiou(pred, conf, pl, gt, gl, K, (0.3,))
    overlap = tiou_arrays(pred[:, 0], pred[:, 1], gt[:, 0], gt[:, 1])
    for k in range(K):
        sel = [i for i in range(len(conf)) if pl[i] == k]
        n_pos = int((gl == k).sum())
        expected = _brute_force_ap([conf[i] for i in sel], [bool(gl[i] == k and overlap[i] >= 0.3) for i in sel], n_pos) if sel else 0.0
        assert per[0.3][k] == pytest.approx(expected, abs=1e-12)


def test_perfect_spans_give_full_map():
    gt = np.array([[1, 5], [2, 9], [3, 4], [6, 8]])
    labels = np.array([0, 1, 0, 1])
    _, means = map_at_tiou(gt, np.ones(4), labels, gt, labels, 2)
    assert all(v == 1.0 for v in means.values())


def test_absent_class_warns_and_is_excluded():
    gt = np.array([[1, 5], [2, 9]])
    labels = np.array([0, 0])
    with pytest.warns(UserWarning, match="absent"):
        per, means = map_at_tiou(gt, np.ones(2), labels, gt, labels, 2, (0.5,))
    assert per[0.5] == [1.0, None] and means[0.5] == 1.0


def test_ties_are_broken_by_id():
    gt = np.array([[1, 5], [1, 5]])
    pred = np.array([[1, 5], [20, 25]])
    labels = np.array([0, 0])
    _, a = map_at_tiou(pred, np.ones(2), labels, gt, labels, 1, (0.5,), ids=["a", "b"])
    _, b = map_at_tiou(pred, np.ones(2), labels, gt, labels, 1, (0.5,), ids=["b", "a"])
    assert a[0.5] == 0.5 and b[0.5] == pytest.approx(0.25)


def test_accuracy_examples():
    assert accuracy([0, 1, 2], [0, 1, 2]) == 1.0
    assert accuracy([0, 0, 0, 0], [0, 0, 1, 1]) == 0.5
    # macro: class 0 has 3/3, class 1 has 0/1
    assert accuracy([0, 0, 0, 0], [0, 0, 0, 1]) == 0.5
    with pytest.raises(ValueError):
        accuracy([], [])


def test_uniform_random_predictions_are_at_chance():
    rng = np.random.default_rng(0)
    labels = np.repeat(np.arange(6), 2000)
    assert accuracy(rng.integers(0, 6, labels.size), labels, 6) == pytest.approx(1 / 6, abs=0.03)


def test_report_serialization(tmp_path):
    gt = np.array([[1, 5], [2, 9], [3, 4]])
    labels = np.array([0, 1, 2])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        rep = evaluate(labels, np.ones(3), labels, 3, gt, gt, method="x")
    rep.write_json(tmp_path / "r.json")
    rep.write_csv(tmp_path / "r.csv")
    data = json.loads((tmp_path / "r.json").read_text())
    assert data["accuracy"] == 1.0 and data["map"]["0.5"] == 1.0
    rows = (tmp_path / "r.csv").read_text().splitlines()
    assert rows[0] == "threshold,ap_0,ap_1,ap_2,map" and len(rows) == 8
    assert rows[1].startswith("0.1,1.000000")
