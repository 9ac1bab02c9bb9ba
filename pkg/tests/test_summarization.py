import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from beacnet.summarization import (
    InfeasibleError,
    SummarizationConfig,
    SummaryPlan,
    brute_force_summarize,
    check_plan,
    dp_summarize,
    emotion_coverage,
    frame_cost,
    frame_costs,
    oracle_trials,
    random_instance,
    segment_diameter,
    window_diameters,
)

SOLVERS = [dp_summarize, brute_force_summarize]


@pytest.mark.parametrize("i, cost", [(3, 1), (4, 1), (1, 2), (5, 2)])
def test_frame_cost_examples(i, cost):
    assert frame_cost(i, (3, 4)) == cost


def test_no_span_costs_two_everywhere():
    assert frame_costs(5, None).tolist() == [2.0] * 5


def test_segment_diameter_examples():
    assert segment_diameter(np.array([0.0, 1.0, 5.0]), 1, 3) == 5.0
    assert segment_diameter(np.array([0.0, 1.0, 5.0]), 2, 2) == 0.0
    assert segment_diameter(np.ones((6, 3)), 1, 6) == 0.0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 15), st.integers(1, 8))
def test_incremental_diameters_match_pairwise_scan(seed, M, k_max):
    x = np.random.default_rng(seed).standard_normal((M, 3))
    diam = window_diameters(x, k_max)
    for g in range(1, min(k_max, M - 1) + 1):
        for i in range(M - g):
            assert diam[g, i] == pytest.approx(segment_diameter(x, i + 1, i + 1 + g), rel=1e-12)


@pytest.mark.parametrize("solver", SOLVERS)
def test_identical_frames_pick_endpoints(solver):
    plan = solver(np.ones((6, 2)), SummarizationConfig(5, 10.0, 6, (3, 4)))
    assert plan.frames == [1, 6] and plan.cost == 4


@pytest.mark.parametrize("solver", SOLVERS)
def test_two_clusters_force_frames_at_the_boundary(solver):
    x = np.array([0.0, 0.1, 0.2, 5.0, 5.1, 5.2])
    cfg = SummarizationConfig(5, 4.85, 6)
    plan = solver(x, cfg)
    assert {3, 4} <= set(plan.frames)
    assert plan.frames == [1, 3, 4, 6] and plan.cost == 8
    assert check_plan(x, plan, cfg) == []


@pytest.mark.parametrize("solver", SOLVERS)
def test_unit_gap_selects_every_frame(solver):
    x = np.random.default_rng(0).standard_normal((7, 2))
    cfg = SummarizationConfig(1, 100.0, 7, (2, 5))
    plan = solver(x, cfg)
    assert plan.frames == list(range(1, 8))
    assert plan.cost == sum(frame_cost(i, (2, 5)) for i in range(1, 8))


@pytest.mark.parametrize("solver", SOLVERS)
def test_two_frames_only_plan(solver):
    assert solver(np.array([0.0, 1.0]), SummarizationConfig(1, 1.0, 2)).frames == [1, 2]


@pytest.mark.parametrize("solver", SOLVERS)
def test_infeasible_adjacent_pair_is_named(solver):
    x = np.array([0.0, 0.5, 3.0, 3.2])
    with pytest.raises(InfeasibleError, match="frames 2 and 3") as info:
        solver(x, SummarizationConfig(3, 1.0, 4))
    assert info.value.pair == (2, 3)


@pytest.mark.parametrize("solver", SOLVERS)
def test_infeasible_frame_budget(solver):
    with pytest.raises(InfeasibleError, match="at most 2 frames"):
        solver(np.zeros(6), SummarizationConfig(2, 1.0, 2))


def test_brute_force_size_limit():
    with pytest.raises(ValueError, match="limited"):
        brute_force_summarize(np.zeros(20), SummarizationConfig(3, 1.0, 10))


@pytest.mark.parametrize("kw", [dict(k_max=0), dict(d_max=0.0), dict(t_max=1)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SummarizationConfig(**{**dict(k_max=2, d_max=1.0, t_max=3), **kw})


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_dp_matches_brute_force(seed):
    frames, cfg = random_instance(np.random.default_rng(seed))
    try:
        dp = dp_summarize(frames, cfg)
    except InfeasibleError:
        with pytest.raises(InfeasibleError):
            brute_force_summarize(frames, cfg)
        return
    assert dp.cost == brute_force_summarize(frames, cfg).cost
    assert check_plan(frames, dp, cfg) == []


def test_check_plan_reports_each_violation():
    x = np.array([0.0, 0.1, 0.2, 5.0])
    cfg = SummarizationConfig(2, 1.0, 2)
    problems = check_plan(x, SummaryPlan([1, 4], 3.0), cfg)
    assert any("k_max" in p for p in problems)
    assert any("d_max" in p for p in problems)
    assert any("recomputed" in p for p in problems)
    assert any("start at frame 1" in p for p in check_plan(x, SummaryPlan([2, 4], 4.0), cfg))
    assert any("t_max" in p for p in check_plan(x, SummaryPlan([1, 2, 3, 4], 8.0), cfg))


def test_oracle_trials_clean():
    out = oracle_trials(200, 1)
    assert out["mismatches"] == [] and out["constraint_violations"] == 0
    assert 0 < out["infeasible"] < 200


def test_dp_scales_to_long_sequences():
    x = np.cumsum(np.random.default_rng(0).standard_normal((2000, 16)) * 0.1, axis=0)
    start = time.perf_counter()
    plan = dp_summarize(x, SummarizationConfig(40, 50.0, 200, (300, 900)))
    assert time.perf_counter() - start < 10
    assert check_plan(x, plan, SummarizationConfig(40, 50.0, 200, (300, 900))) == []


def test_emotion_coverage():
    assert emotion_coverage([1, 5, 6, 10], (5, 7)) == 0.5
