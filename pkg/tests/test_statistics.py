import numpy as np
import pytest

from src.estimates import DecayFit, EstimateReport, fit_decay
from src.utils.statistics import RunningStats, compensated_prefix_sums, neumaier_add


def test_compensated_prefix_sums_recovers_small_terms():
    values = np.array([1e16, 1.0, -1e16, 1.0])
    sums = compensated_prefix_sums(values)
    assert sums.tolist()[0] == 0.0
    assert sums[-1] == 2.0
    assert sums.shape == (5,)


def test_neumaier_add_keeps_carry():
    total, carry = neumaier_add(np.array(1e16), np.array(0.0), np.array(1.0))
    assert float(total) == 1e16
    assert float(carry) == 1.0


def test_running_stats_matches_numpy():
    rows = np.random.default_rng(0).normal(size=(500, 3))
    stats = RunningStats(3)
    for row in rows:
        stats.push(row)
    assert np.allclose(stats.mean, rows.mean(axis=0))
    assert np.allclose(stats.var, rows.var(axis=0, ddof=1))
    assert np.allclose(stats.sem, rows.std(axis=0, ddof=1) / np.sqrt(500))
    assert np.array_equal(stats.peak, rows.max(axis=0))


def test_batch_and_merge_agree_with_single_pass():
    rows = np.random.default_rng(1).exponential(size=(300, 2))
    single = RunningStats(2)
    single.push_batch(rows)
    left, right = RunningStats(2), RunningStats(2)
    left.push_batch(rows[:117])
    right.push_batch(rows[117:])
    merged = left + right
    assert merged.count == 300
    assert np.allclose(merged.mean, single.mean, rtol=1e-14)
    assert np.allclose(merged.var, single.var, rtol=1e-12)


def test_empty_stats():
    stats = RunningStats()
    assert stats.count == 0
    assert np.isnan(stats.mean)
    assert stats.var == 0.0
    stats.push(2.0)
    assert stats.mean == 2.0
    assert stats.var == 0.0


def test_estimate_report_from_samples():
    report = EstimateReport.from_samples([1.0, 2.0, 3.0], seed=4, key=1, label="x")
    assert report.estimate == pytest.approx(2.0)
    assert report.std_error == pytest.approx(1.0 / np.sqrt(3))
    assert report.within(2.5, 1.0)
    assert not report.within(4.0, 1.0)
    row = report.to_row()
    assert row["trials"] == 3
    assert row["seed"] == 4


def test_row_names_its_grid_column():
    report = EstimateReport(0.5, 0.01, 100, 0, key=6, key_name="l")
    row = report.to_row()
    assert row["l"] == 6
    assert row["key"] == 6
    assert "x" not in row
    assert "l" not in EstimateReport(0.5, 0.01, 100, 0, key=6).to_row()


def test_complex_estimate_is_componentwise():
    report = EstimateReport.from_samples([1 + 1j, 1 - 1j, 1 + 3j, 1 - 3j], seed=0)
    assert isinstance(report.estimate, complex)
    assert report.std_error.real == 0.0
    assert report.within(1 + 0j, 1.0)
    assert report.to_row()["estimate"] == {"re": 1.0, "im": 0.0}


def test_zero_count_flag():
    stats = RunningStats(1)
    stats.push_batch(np.zeros((10, 1)))
    assert EstimateReport.from_stats(stats, 0, seed=0).zero_count


def test_estimate_needs_trials():
    with pytest.raises(ValueError):
        EstimateReport(estimate=0.0, std_error=0.0, trials=0, seed=0)
    with pytest.raises(ValueError):
        EstimateReport.from_samples([1.0], seed=0)


def test_agrees_with_uses_summed_errors():
    a = EstimateReport(1.0, 0.1, 10, 0)
    b = EstimateReport(1.5, 0.1, 10, 0)
    assert a.agrees_with(b, 3.0)
    assert not a.agrees_with(b, 2.0)


def test_fit_decay_recovers_line():
    fit = fit_decay([1, 2, 3, 4], [3.0, 1.0, -1.0, -3.0], label="line")
    assert fit.slope == pytest.approx(-2.0)
    assert fit.intercept == pytest.approx(5.0)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.normal_equation_error() <= 1e-12
    assert fit.to_row()["label"] == "line"


def test_fit_residuals_satisfy_normal_equations():
    rng = np.random.default_rng(2)
    x = np.arange(10.0)
    fit = fit_decay(x, -0.3 * x + rng.normal(size=10))
    assert isinstance(fit, DecayFit)
    assert fit.normal_equation_error() <= 1e-10


def test_fit_needs_two_points():
    with pytest.raises(ValueError):
        fit_decay([1.0], [2.0])
