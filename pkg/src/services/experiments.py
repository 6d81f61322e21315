"""
Monte Carlo campaigns for the cascade's quantitative claims.

Every campaign derives trial ``t``'s tree from ``(seed, t)``, so trials
share randomness across grid points (common random numbers) and nested
events stay nested trial by trial.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from src.analyzers import measure
from src.analyzers.walk_oracle import (
    TestFunction,
    ballot_probability,
    barrier_walk_bound,
    exp_sum,
    many_to_one_compare,
)
from src.config import Config
from src.enums import DiameterMode, ExperimentName, Phase, SimulationMode
from src.estimates import DecayFit, EstimateReport, fit_decay
from src.services.trial_runner import TrialRunner
from src.simulation.cascade import LevelState, simulate
from src.simulation.seeding import TAG_AUX, TAG_COPY, TAG_TREE, TreeStreams, derive_generator
from src.simulation.weights import (
    MIN_CRITICALITY_TRIALS,
    ModelParams,
    ParameterError,
    criticality_check,
    leaf_weight,
    mean_factor_estimate,
    sample_theta_batch,
)

logger = logging.getLogger(__name__)

MAX_BARRIER_DEPTH = 24
MODULUS_MIN_R_SQUARED = 0.8
# E[TV(n)] / E[TV(n-2)] must exceed 1 + margin for the variation to count as growing.
VARIATION_GROWTH_MARGIN = 0.01


class GridError(ValueError):
    """Raised when a level grid leaves the admissible range."""


@dataclass
class IdentityCheck:
    """One exact identity evaluated on a simulated tree."""

    name: str
    max_error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance

    def to_row(self) -> Dict[str, Any]:
        return {
            "label": self.name,
            "max_error": self.max_error,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


@dataclass
class ExperimentResult:
    """Rows, fits and summary of one campaign."""

    experiment: ExperimentName
    rows: List[EstimateReport] = field(default_factory=list)
    fits: List[DecayFit] = field(default_factory=list)
    checks: List[IdentityCheck] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)

    @property
    def identity_violation(self) -> bool:
        return any(not check.passed for check in self.checks)

    def table(self) -> List[Dict[str, Any]]:
        return [row.to_row() for row in self.rows] + [check.to_row() for check in self.checks]


def tree_streams(seed: int, trial: int) -> TreeStreams:
    return TreeStreams(seed, trial, TAG_TREE)


def _warn_off_boundary(name: str, params: ModelParams) -> None:
    if not params.on_boundary:
        logger.warning(
            "⚠️ %s is stated for the I/II boundary; (%s, %s) is %s",
            name, params.gamma, params.beta, params.phase.label,
        )


def _simulate_level(params: ModelParams, n: int, seed: int, trial: int, **kwargs) -> LevelState:
    return simulate(params, n, tree_streams(seed, trial), SimulationMode.BREADTH, **kwargs)


def criticality_experiment(
    trials: int,
    *,
    seed: int = 0,
    params_grid: Sequence[ModelParams] = (),
) -> ExperimentResult:
    """Criticality constants of the real walk, plus MC-vs-closed-form E[M_1] per parameter pair."""
    if trials < MIN_CRITICALITY_TRIALS:
        raise ParameterError(f"criticality needs at least {MIN_CRITICALITY_TRIALS} trials")
    result = ExperimentResult(ExperimentName.CRITICALITY)
    total, derivative = criticality_check(trials, derive_generator(seed, TAG_AUX, 0, 1), seed=seed)
    result.rows.extend([total, derivative])
    for index, params in enumerate(params_grid):
        report = mean_factor_estimate(params, trials, derive_generator(seed, TAG_AUX, index, 2), seed=seed)
        report.key = index
        report.label = f"E[M_1] gamma={params.gamma:g} beta={params.beta:g}"
        result.rows.append(report)
    result.summary = {
        "criticality_within_3se": total.within(1.0, 3.0) and derivative.within(0.0, 3.0),
        "mean_factor_within_4se": all(
            row.within(row.extra["closed_form"], 4.0) for row in result.rows[2:]
        ),
    }
    return result


def martingale_mean(
    params: ModelParams,
    n: int,
    trials: int,
    *,
    seed: int = 0,
    mode: SimulationMode = SimulationMode.BREADTH,
    runner: Optional[TrialRunner] = None,
) -> EstimateReport:
    """Complex mean of M_n / mean_factor^n."""
    if n == 0:
        return EstimateReport(1 + 0j, 0j, trials=1, seed=seed, key=0, key_name="n", label="M_0")
    runner = runner or TrialRunner()
    scale = params.mean_factor ** n

    def trial_fn(trial: int):
        source = simulate(params, n, tree_streams(seed, trial), mode)
        if mode is SimulationMode.STREAM:
            total = measure.stream_totals(source, params).total
        else:
            total = complex(source.weights(params).sum())
        total /= scale
        return total.real, total.imag

    stats = runner.accumulate(trial_fn, trials, 2)
    return EstimateReport.from_stats(stats, 0, imag_index=1, seed=seed, key=n, key_name="n", label=f"M_{n}")


def _tail_bound(x: float) -> float:
    return math.exp(-x) * (1.0 + x)


def tail_sup(
    params: ModelParams,
    n: int,
    x_grid: Sequence[float],
    trials: int,
    *,
    seed: int = 0,
    runner: Optional[TrialRunner] = None,
) -> List[EstimateReport]:
    """P(||M_{n,0}||_inf >= e^{gamma x}) per x, with bound_ratio = estimate e^x / (1 + x)."""
    _warn_off_boundary("tail_sup", params)
    runner = runner or TrialRunner()
    thresholds = np.exp(params.gamma * np.asarray(x_grid, dtype=np.float64))

    def trial_fn(trial: int):
        proc = measure.partial_sums(_simulate_level(params, n, seed, trial), params)
        value = measure.sup_functional(proc, n).value
        return (value >= thresholds).astype(np.float64)

    stats = runner.accumulate(trial_fn, trials, len(thresholds))
    rows = []
    for index, x in enumerate(x_grid):
        report = EstimateReport.from_stats(
            stats, index, seed=seed, key=float(x), key_name="x", label="P(sup >= e^{gamma x})"
        )
        report.bound_ratio = report.estimate / _tail_bound(x)
        rows.append(report)
    return rows


def fourth_moment(
    params: ModelParams,
    n: int,
    x: float,
    trials: int,
    *,
    seed: int = 0,
    runner: Optional[TrialRunner] = None,
) -> EstimateReport:
    """E[|M_n|^4 1{min over nodes up to depth n of V >= -x}], bound_ratio = estimate e^{x(1 - 4 gamma)}."""
    if x < 0:
        raise ParameterError(f"x must be non-negative (got {x})")
    _warn_off_boundary("fourth_moment", params)
    runner = runner or TrialRunner()

    def trial_fn(trial: int):
        level = _simulate_level(params, n, seed, trial)
        if level.min_so_far < -x:
            return (0.0,)
        return (abs(complex(level.weights(params).sum())) ** 4,)

    report = EstimateReport.from_stats(
        runner.accumulate(trial_fn, trials, 1), 0, seed=seed, key=float(x), key_name="x",
        label=f"E[|M_{n}|^4; min >= -x]",
    )
    report.bound_ratio = report.estimate * math.exp(x * (1.0 - 4.0 * params.gamma))
    report.extra["n"] = n
    return report


def barrier_probability(
    x_grid: Sequence[float],
    n_max: int,
    trials: int,
    *,
    epsilon0: Optional[float] = None,
    seed: int = 0,
    early_stop: bool = True,
    walk_bound: bool = False,
    runner: Optional[TrialRunner] = None,
) -> List[EstimateReport]:
    """
    P(some u with 1 <= |u| <= n_max has V(u) <= -x + r(eps0) ln|u|) per x.
    The event is truncated at n_max, so estimates bound the infinite-tree
    probability from below.
    """
    if not 1 <= n_max <= MAX_BARRIER_DEPTH:
        raise ParameterError(f"n_max must lie in [1, {MAX_BARRIER_DEPTH}] (got {n_max})")
    epsilon0 = Config.DEFAULT_EPSILON0 if epsilon0 is None else epsilon0
    runner = runner or TrialRunner()
    grid = [float(x) for x in x_grid]
    deepest = -max(grid)

    def all_crossed(level: LevelState) -> bool:
        return level.barrier_min <= deepest

    def trial_fn(trial: int):
        level = simulate(
            None, n_max, tree_streams(seed, trial),
            epsilon0=epsilon0, stop_when=all_crossed if early_stop else None,
        )
        return [float(level.barrier_crossed(x)) for x in grid]

    stats = runner.accumulate(trial_fn, trials, len(grid))
    note = f"tree truncated at depth {n_max}; lower bound on the infinite-tree probability"
    rows = []
    for index, x in enumerate(grid):
        report = EstimateReport.from_stats(
            stats, index, seed=seed, key=x, key_name="x", label="P(barrier crossed)", truncation=note,
            extra={"epsilon0": epsilon0},
        )
        report.bound_ratio = report.estimate / _tail_bound(x)
        if walk_bound:
            bound = barrier_walk_bound(x, epsilon0, n_max, trials, seed=seed, runner=runner)
            report.extra["first_moment_bound"] = bound.estimate
            report.extra["first_moment_std_error"] = bound.std_error
        rows.append(report)
    return rows


def modulus_threshold(l: int, gamma: float, eta: float, eps: float) -> float:
    """(delta_{l,eps})^gamma with delta_{l,eps} = l^{-((1 - eta)/2 - eps)}."""
    return float(l) ** (-((1.0 - eta) / 2.0 - eps) * gamma)


def validate_l_grid(l_grid: Sequence[int], n: int) -> List[int]:
    grid = sorted({int(l) for l in l_grid})
    if len(grid) < 2:
        raise GridError("the level grid needs at least two levels for a decay fit")
    if grid[0] < 2 or grid[-1] > n - 2:
        raise GridError(f"levels must lie in [2, {n - 2}] for depth {n} (got {grid[0]}..{grid[-1]})")
    return grid


def modulus_experiment(
    params: ModelParams,
    n: int,
    l_grid: Sequence[int],
    trials: int,
    *,
    seed: int = 0,
    diameter_mode: DiameterMode = DiameterMode.EXACT,
    eta: Optional[float] = None,
    eps: Optional[float] = None,
    sup_bound: bool = False,
    runner: Optional[TrialRunner] = None,
) -> ExperimentResult:
    """
    Per level l: E[osc_l], osc_l the largest level-l block diameter of the
    path divided by mean_factor^n, with the fraction of trials above
    (delta_{l,eps})^gamma. Fits ln E[osc_l] against ln l and against l ln 2.
    """
    grid = validate_l_grid(l_grid, n)
    eta = Config.MODULUS_ETA if eta is None else eta
    eps = Config.MODULUS_EPS if eps is None else eps
    if params.phase is not Phase.PHASE_I:
        _warn_off_boundary("modulus_experiment", params)
    runner = runner or TrialRunner()
    scale = params.mean_factor ** n
    thresholds = np.array([modulus_threshold(l, params.gamma, eta, eps) for l in grid])
    size = len(grid)
    width = 4 * size if sup_bound else 3 * size

    def trial_fn(trial: int):
        proc = measure.partial_sums(_simulate_level(params, n, seed, trial), params)
        row = np.empty(width)
        for index, l in enumerate(grid):
            osc = measure.block_oscillations(proc, l, diameter_mode)
            row[index] = osc.lo / scale
            row[size + index] = osc.hi / scale
            row[2 * size + index] = float(osc.lo / scale >= thresholds[index])
            if sup_bound:
                row[3 * size + index] = measure.block_sup_bound(proc, l) / scale
        return row

    stats = runner.accumulate(trial_fn, trials, width)
    result = ExperimentResult(ExperimentName.MODULUS)
    for index, l in enumerate(grid):
        report = EstimateReport.from_stats(stats, index, seed=seed, key=l, key_name="l", label="E[osc_l]")
        report.extra.update({
            "hi": float(stats.mean[size + index]),
            "threshold": float(thresholds[index]),
            "fraction_above_threshold": float(stats.mean[2 * size + index]),
            "approximate": diameter_mode.approximate,
        })
        if sup_bound:
            report.extra["ray_sup_bound"] = float(stats.mean[3 * size + index])
        result.rows.append(report)

    means = np.array([row.estimate for row in result.rows])
    if np.all(means > 0):
        log_means = np.log(means)
        by_log_l = fit_decay(np.log(grid), log_means, label="ln E[osc_l] vs ln l")
        by_l = fit_decay(np.asarray(grid) * math.log(2.0), log_means, label="ln E[osc_l] vs l ln 2")
        result.fits = [by_l, by_log_l] if params.phase is Phase.PHASE_I else [by_log_l, by_l]
        primary = result.fits[0]
        result.summary = {
            "slope": primary.slope,
            "r_squared": primary.r_squared,
            "decaying": primary.slope < 0 and primary.r_squared >= MODULUS_MIN_R_SQUARED,
        }
    else:
        logger.warning("⚠️ Some E[osc_l] vanished; skipping the decay fit")
        result.summary = {"decaying": False}
    result.summary.update({"eta": eta, "eps": eps, "normalisation": scale})
    return result


def variation_closed_form(params: ModelParams, n: int) -> float:
    """E[sum_{|z|=n} e^{-gamma V(z)}] = 2^{n (1 + gamma^2 - 2 gamma)}."""
    return 2.0 ** (n * (1.0 + params.gamma ** 2 - 2.0 * params.gamma))


def variation_experiment(
    params: ModelParams,
    n: int,
    trials: int,
    *,
    seed: int = 0,
    mode: SimulationMode = SimulationMode.BREADTH,
    runner: Optional[TrialRunner] = None,
) -> ExperimentResult:
    """E[TV(l)] for l = 0..n; stream mode reports only l = 0 and l = n."""
    _warn_off_boundary("variation_experiment", params)
    runner = runner or TrialRunner()
    levels = [0, n] if mode is SimulationMode.STREAM else list(range(n + 1))
    if mode is SimulationMode.STREAM and n == 0:
        levels = [0]

    def trial_fn(trial: int):
        source = simulate(params, n, tree_streams(seed, trial), mode)
        if mode is SimulationMode.STREAM:
            totals = measure.stream_totals(source, params)
            return [abs(totals.total), totals.modulus_sum][:len(levels)]
        proc = measure.partial_sums(source, params)
        return [measure.total_variation(proc, l) for l in levels]

    stats = runner.accumulate(trial_fn, trials, len(levels))
    result = ExperimentResult(ExperimentName.VARIATION)
    for index, l in enumerate(levels):
        report = EstimateReport.from_stats(stats, index, seed=seed, key=l, key_name="l", label="E[TV(l)]")
        if l == n:
            report.extra["closed_form"] = variation_closed_form(params, n)
        result.rows.append(report)

    means = [row.estimate for row in result.rows]
    summary: Dict[str, Any] = {
        "strictly_increasing": all(b > a for a, b in zip(means, means[1:])),
        "closed_form_within_3se": result.rows[-1].within(variation_closed_form(params, n), 3.0),
    }
    if mode is SimulationMode.BREADTH and n >= 2 and means[n - 2] > 0:
        ratio = means[n] / means[n - 2]
        summary["growth_ratio"] = ratio
        summary["no_plateau"] = ratio > 1.0 + VARIATION_GROWTH_MARGIN
    result.summary = summary
    return result


def smoothing_transform_experiment(
    params: ModelParams,
    n: int,
    trials: int,
    *,
    seed: int = 0,
    runner: Optional[TrialRunner] = None,
) -> ExperimentResult:
    """
    Compare |M_{n+1}| with |T(0) M^(0)_n + T(1) M^(1)_n| built from two
    independent depth-n copies and fresh first-generation weights.
    """
    runner = runner or TrialRunner()

    def direct(trial: int) -> float:
        return abs(complex(_simulate_level(params, n + 1, seed, trial).weights(params).sum()))

    def recombined(trial: int) -> float:
        copies = [
            simulate(params, n, TreeStreams(seed, 2 * trial + side, TAG_COPY)).weights(params).sum()
            for side in (0, 1)
        ]
        theta = sample_theta_batch(derive_generator(seed, TAG_AUX, trial, 3), 2)
        factors = leaf_weight(params, theta.v_inc, theta.x_inc)
        return abs(complex((factors * np.asarray(copies)).sum()))

    direct_samples = runner.map(direct, trials)
    recombined_samples = runner.map(recombined, trials)
    ks = measure.smoothing_transform_ks(direct_samples, recombined_samples)
    result = ExperimentResult(ExperimentName.SMOOTHING)
    chunk = runner.chunk_size
    result.rows = [
        EstimateReport.from_stats(
            TrialRunner.collect([[s] for s in direct_samples], 1, chunk), 0, seed=seed, key=n + 1, key_name="n",
            label="E|M_{n+1}|",
        ),
        EstimateReport.from_stats(
            TrialRunner.collect([[s] for s in recombined_samples], 1, chunk), 0, seed=seed, key=n + 1, key_name="n",
            label="E|T(0) M(0) + T(1) M(1)|",
        ),
    ]
    result.summary = {
        "ks_statistic": ks.statistic,
        "ks_pvalue": ks.pvalue,
        "ks_critical_1pct": ks.critical_value,
        "passed": ks.passed,
    }
    return result


DEFAULT_TEST_FUNCTIONS = (
    TestFunction.one(),
    TestFunction.identity(),
    TestFunction.indicator_above(0.0),
    TestFunction.exp_decay(1.0),
)


def many_to_one_experiment(
    n: int,
    x_grid: Sequence[float],
    trials: int,
    *,
    seed: int = 0,
    functions: Sequence[TestFunction] = DEFAULT_TEST_FUNCTIONS,
    mode: SimulationMode = SimulationMode.BREADTH,
    runner: Optional[TrialRunner] = None,
) -> ExperimentResult:
    """Tree vs walk side for every test function and start point."""
    result = ExperimentResult(ExperimentName.MANY_TO_ONE)
    agreements = []
    for F in functions:
        for x in x_grid:
            lhs, rhs = many_to_one_compare(F, n, float(x), trials, seed=seed, mode=mode, runner=runner)
            result.rows.extend([lhs, rhs])
            agreements.append(lhs.agrees_with(rhs, 4.0))
    result.summary = {"all_within_4se": all(agreements)}
    return result


def ballot_experiment(
    n_grid: Sequence[int],
    x: float,
    a: float,
    b: float,
    trials: int,
    *,
    seed: int = 0,
    runner: Optional[TrialRunner] = None,
) -> ExperimentResult:
    """Ballot estimates over an n grid; the bound ratios should share one constant."""
    result = ExperimentResult(ExperimentName.BALLOT)
    for n in n_grid:
        result.rows.append(ballot_probability(int(n), x, a, b, trials, seed=seed, runner=runner))
    ratios = [row.bound_ratio for row in result.rows if row.bound_ratio is not None]
    if ratios:
        result.summary["max_bound_ratio"] = max(ratios)
    return result


def exp_sum_experiment(
    kappa: float,
    x_grid: Sequence[float],
    horizon: int,
    trials: int,
    *,
    seed: int = 0,
    runner: Optional[TrialRunner] = None,
) -> ExperimentResult:
    result = ExperimentResult(ExperimentName.EXP_SUM)
    for x in x_grid:
        result.rows.append(exp_sum(kappa, float(x), horizon, trials, seed=seed, runner=runner))
    result.summary = {
        "max_estimate": max(row.estimate for row in result.rows),
        "all_stabilized": all(row.extra["stabilized"] for row in result.rows),
    }
    return result
