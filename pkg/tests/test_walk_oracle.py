import math

import numpy as np
import pytest
from scipy.stats import norm

from src.analyzers.walk_oracle import (
    STEP_SD,
    TestFunction,
    ballot_bound,
    ballot_closed_form,
    ballot_probability,
    barrier_walk_bound,
    exp_sum,
    many_to_one_compare,
    sample_walk,
)
from src.enums import SimulationMode
from src.services.trial_runner import TrialRunner
from src.simulation.weights import LN2, ParameterError


def test_step_variance_is_two_ln_two():
    assert STEP_SD ** 2 == pytest.approx(2 * LN2)


def test_empty_walk():
    path = sample_walk(0, 1.5, np.random.default_rng(0))
    assert path.steps.size == 0
    assert path.running_min == math.inf
    assert path.end == 1.5


def test_walk_starts_at_x():
    path = sample_walk(1000, 2.0, np.random.default_rng(0))
    increments = np.diff(np.concatenate(([2.0], path.steps)))
    assert abs(increments.mean()) <= 4 * STEP_SD / math.sqrt(1000)
    assert path.running_min == path.steps.min()


def test_negative_walk_length_rejected():
    with pytest.raises(ParameterError):
        sample_walk(-1, 0.0, np.random.default_rng(0))


@pytest.mark.parametrize(
    "F,y,expected",
    [
        (TestFunction.one(), 3.0, 1.0),
        (TestFunction.identity(), -2.5, -2.5),
        (TestFunction.indicator_above(0.0), 0.0, 1.0),
        (TestFunction.indicator_above(0.0), -1e-9, 0.0),
        (TestFunction.exp_decay(2.0), 1.0, math.exp(-2.0)),
        (TestFunction.polynomial([1.0, 0.0, 3.0]), 2.0, 13.0),
    ],
)
def test_test_functions(F, y, expected):
    assert float(F(y)) == pytest.approx(expected)


def test_test_function_labels():
    assert TestFunction.one().label == "one"
    assert TestFunction.exp_decay(1.0).label == "exp_decay(1)"


@pytest.mark.parametrize(
    "F,n,x",
    [
        (TestFunction.one(), 1, 0.0),
        (TestFunction.identity(), 2, 1.0),
        (TestFunction.indicator_above(0.0), 3, 0.0),
        (TestFunction.exp_decay(0.5), 1, 3.0),
    ],
)
def test_many_to_one_sides_agree(F, n, x):
    lhs, rhs = many_to_one_compare(F, n, x, 4000, seed=2, runner=TrialRunner(threads=1))
    assert lhs.agrees_with(rhs, 4.0)
    assert lhs.trials == rhs.trials == 4000


@pytest.mark.parametrize("F", [TestFunction.identity(), TestFunction.exp_decay(0.5)])
def test_many_to_one_stream_mode_matches_breadth(F):
    runner = TrialRunner(threads=1)
    breadth = many_to_one_compare(F, 4, 1.0, 1000, seed=3, runner=runner)
    stream = many_to_one_compare(F, 4, 1.0, 1000, seed=3, mode=SimulationMode.STREAM, runner=runner)
    assert stream[0].estimate == breadth[0].estimate
    assert stream[0].std_error == breadth[0].std_error
    assert stream[1].estimate == breadth[1].estimate


def test_many_to_one_at_depth_zero_is_exact():
    lhs, rhs = many_to_one_compare(TestFunction.identity(), 0, 1.5, 1000, seed=0)
    assert lhs.estimate == pytest.approx(1.5)
    assert rhs.estimate == pytest.approx(1.5)


def test_many_to_one_rejects_small_budgets():
    with pytest.raises(ParameterError):
        many_to_one_compare(TestFunction.one(), 2, 0.0, 999)
    with pytest.raises(ParameterError):
        many_to_one_compare(TestFunction.one(), 21, 0.0, 1000)


def test_ballot_closed_form():
    sd = math.sqrt(2 * LN2)
    expected = norm.cdf((1.0 - 2.0) / sd) - norm.cdf((0.0 - 2.0) / sd)
    assert ballot_closed_form(2.0, -5.0, 1.0) == pytest.approx(expected)
    assert ballot_closed_form(0.0, -3.0, -1.0) == 0.0


def test_ballot_single_step_matches_closed_form():
    report = ballot_probability(1, 2.0, 0.0, 1.0, 40_000, seed=3)
    assert report.within(report.extra["closed_form"], 4.0)
    assert report.bound_ratio == pytest.approx(report.estimate / ballot_bound(1, 2.0, 0.0, 1.0))


def test_ballot_infinite_window_has_no_ratio():
    report = ballot_probability(4, 1.0, 0.0, math.inf, 10_000, seed=3)
    assert report.bound_ratio is None
    assert 0.0 < report.estimate < 1.0


@pytest.mark.parametrize(
    "args",
    [(4, 1.0, 2.0, 1.0, 10_000), (4, -1.0, 0.0, 1.0, 10_000), (0, 1.0, 0.0, 1.0, 10_000), (4, 1.0, 0.0, 1.0, 9_999)],
)
def test_ballot_rejects_bad_arguments(args):
    with pytest.raises(ParameterError):
        ballot_probability(*args)


def test_ballot_probability_is_deterministic():
    first = ballot_probability(8, 1.0, 0.0, 2.0, 10_000, seed=9, runner=TrialRunner(threads=1))
    second = ballot_probability(8, 1.0, 0.0, 2.0, 10_000, seed=9, runner=TrialRunner(threads=4))
    assert first.estimate == second.estimate
    assert first.std_error == second.std_error


def test_exp_sum_reports_both_horizons():
    report = exp_sum(1.0, 1.0, 50, 2000, seed=1)
    assert report.estimate >= math.exp(-1.0)
    assert report.extra["estimate_2h"] >= report.estimate
    assert report.extra["horizon"] == 50
    assert "horizon 50" in report.truncation
    assert isinstance(report.extra["stabilized"], bool)


@pytest.mark.parametrize("kappa,ceiling", [(1.0, 10.0), (2.0, 5.0)])
def test_exp_sum_bounded_by_common_constant(kappa, ceiling):
    # one constant per kappa for every start; the sum does not decay in x
    reports = [exp_sum(kappa, x, 4000, 2000, seed=4) for x in (0.0, 1.0, 2.0, 4.0)]
    assert all(report.extra["stabilized"] for report in reports)
    top = max(reports, key=lambda report: report.extra["estimate_2h"])
    for report in reports:
        assert report.extra["estimate_2h"] <= top.extra["estimate_2h"] + 4 * top.extra["std_error_2h"]
    assert top.extra["estimate_2h"] + 4 * top.extra["std_error_2h"] <= ceiling


@pytest.mark.parametrize("kwargs", [{"kappa": 0.0}, {"x": -1.0}, {"horizon": 0}])
def test_exp_sum_rejects_bad_arguments(kwargs):
    args = {"kappa": 1.0, "x": 0.0, "horizon": 10, "trials": 100}
    args.update(kwargs)
    with pytest.raises(ParameterError):
        exp_sum(**args)


def test_barrier_walk_bound_decreases_with_height():
    low = barrier_walk_bound(1.0, 0.05, 200, 4000, seed=6)
    high = barrier_walk_bound(6.0, 0.05, 200, 4000, seed=6)
    assert high.estimate <= low.estimate
    assert low.bound_ratio == pytest.approx(low.estimate * math.e / 2.0)
