"""
The one-dimensional Gaussian walk behind the many-to-one identity, and the
walk estimates (ballot-type probability, exponential sums, first-moment
barrier bound) checked against it.

Steps are Normal(0, 2 ln 2): the tilt e^{-V} turns the node increment
Normal(2 ln 2, 2 ln 2) into a centred step of the same variance.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.special import ndtr

from src.enums import SimulationMode, TestFunctionKind
from src.estimates import EstimateReport
from src.services.trial_runner import TrialRunner
from src.simulation.cascade import simulate
from src.simulation.seeding import TAG_TREE, TAG_WALK, TreeStreams, derive_generator
from src.simulation.weights import V_VARIANCE, ParameterError

logger = logging.getLogger(__name__)

STEP_SD = math.sqrt(V_VARIANCE)
MIN_MANY_TO_ONE_TRIALS = 1_000
MIN_BALLOT_TRIALS = 10_000
MAX_TREE_DEPTH = 20

# Keeps many-to-one walk paths apart from ballot / exp-sum / barrier paths under one seed.
_WALK_MANY_TO_ONE = 0
_WALK_BALLOT = 1
_WALK_EXP_SUM = 2
_WALK_BARRIER = 3


@dataclass
class WalkPath:
    """S_1 .. S_n from ``start``; ``running_min`` is +inf for the empty path."""

    start: float
    steps: np.ndarray
    running_min: float = field(init=False)

    def __post_init__(self) -> None:
        self.running_min = float(self.steps.min()) if self.steps.size else math.inf

    @property
    def end(self) -> float:
        return float(self.steps[-1]) if self.steps.size else self.start


def sample_walk(n: int, x: float, rng: np.random.Generator) -> WalkPath:
    if n < 0:
        raise ParameterError(f"walk length must be non-negative (got {n})")
    steps = x + np.cumsum(STEP_SD * rng.standard_normal(n))
    return WalkPath(start=x, steps=steps)


@dataclass(frozen=True)
class TestFunction:
    """Test function F of the many-to-one comparison."""

    __test__ = False

    kind: TestFunctionKind
    parameters: Tuple[float, ...] = ()

    @classmethod
    def one(cls) -> "TestFunction":
        return cls(TestFunctionKind.ONE)

    @classmethod
    def identity(cls) -> "TestFunction":
        return cls(TestFunctionKind.IDENTITY)

    @classmethod
    def indicator_above(cls, threshold: float) -> "TestFunction":
        """1{y >= threshold}."""
        return cls(TestFunctionKind.INDICATOR_ABOVE, (float(threshold),))

    @classmethod
    def exp_decay(cls, rate: float) -> "TestFunction":
        """e^{-rate * y}."""
        return cls(TestFunctionKind.EXP_DECAY, (float(rate),))

    @classmethod
    def polynomial(cls, coeffs) -> "TestFunction":
        """sum_k coeffs[k] y^k."""
        return cls(TestFunctionKind.POLYNOMIAL, tuple(float(c) for c in coeffs))

    def __call__(self, y):
        y = np.asarray(y, dtype=np.float64)
        if self.kind is TestFunctionKind.ONE:
            return np.ones_like(y)
        if self.kind is TestFunctionKind.IDENTITY:
            return y.copy()
        if self.kind is TestFunctionKind.INDICATOR_ABOVE:
            return (y >= self.parameters[0]).astype(np.float64)
        if self.kind is TestFunctionKind.EXP_DECAY:
            return np.exp(-self.parameters[0] * y)
        return np.polynomial.polynomial.polyval(y, self.parameters)

    @property
    def label(self) -> str:
        if not self.parameters:
            return self.kind.value
        return f"{self.kind.value}({', '.join(f'{p:g}' for p in self.parameters)})"


def many_to_one_compare(
    F: TestFunction,
    n: int,
    x: float,
    trials: int,
    *,
    seed: int = 0,
    mode: SimulationMode = SimulationMode.BREADTH,
    runner: Optional[TrialRunner] = None,
) -> Tuple[EstimateReport, EstimateReport]:
    """
    lhs: E[sum_{|z|=n} F(x + V(z)) e^{-V(z)}] over simulated trees;
    rhs: E_x[F(S_n)] over walks.

    In stream mode the generation-n values are read leaf by leaf from a
    depth-first cursor; both modes see the same leaves.
    """
    if trials < MIN_MANY_TO_ONE_TRIALS:
        raise ParameterError(f"many_to_one_compare needs at least {MIN_MANY_TO_ONE_TRIALS} trials")
    if not 0 <= n <= MAX_TREE_DEPTH:
        raise ParameterError(f"tree depth must lie in [0, {MAX_TREE_DEPTH}] (got {n})")
    runner = runner or TrialRunner()

    def tree_side(trial: int):
        tree = simulate(None, n, TreeStreams(seed, trial, TAG_TREE), mode)
        if mode is SimulationMode.STREAM:
            v = np.fromiter((leaf.v for leaf in tree), dtype=np.float64, count=2 ** n)
        else:
            v = tree.v
        return (float((F(x + v) * np.exp(-v)).sum()),)

    def walk_side(trial: int):
        path = sample_walk(n, x, derive_generator(seed, TAG_WALK, trial, _WALK_MANY_TO_ONE))
        return (float(F(path.end)),)

    label = f"{F.label}, n={n}, x={x:g}"
    lhs = EstimateReport.from_stats(
        runner.accumulate(tree_side, trials, 1), 0, seed=seed, key=x, key_name="x", label=f"tree: {label}"
    )
    rhs = EstimateReport.from_stats(
        runner.accumulate(walk_side, trials, 1), 0, seed=seed, key=x, key_name="x", label=f"walk: {label}"
    )
    logger.debug("Many-to-one %s: tree %.5g, walk %.5g", label, lhs.estimate, rhs.estimate)
    return lhs, rhs


def ballot_closed_form(x: float, a: float, b: float) -> float:
    """P_x(S_1 >= 0, S_1 in [a, b]) for a single Normal(0, 2 ln 2) step."""
    lower = max(a, 0.0)
    if lower > b:
        return 0.0
    return float(ndtr((b - x) / STEP_SD) - ndtr((lower - x) / STEP_SD))


def ballot_bound(n: int, x: float, a: float, b: float) -> float:
    """(1 + x)(1 + b^+)(1 + (b - a)) / n^{3/2}."""
    return (1.0 + x) * (1.0 + max(b, 0.0)) * (1.0 + (b - a)) / n ** 1.5


def ballot_probability(
    n: int,
    x: float,
    a: float,
    b: float,
    trials: int,
    *,
    seed: int = 0,
    runner: Optional[TrialRunner] = None,
) -> EstimateReport:
    """P_x(min_{1<=j<=n} S_j >= 0, S_n in [a, b]) with its ratio to the n^{-3/2} bound."""
    if a > b:
        raise ParameterError(f"empty window [{a}, {b}]")
    if x < 0:
        raise ParameterError(f"start must be non-negative (got {x})")
    if n < 1:
        raise ParameterError(f"ballot estimate needs n >= 1 (got {n})")
    if trials < MIN_BALLOT_TRIALS:
        raise ParameterError(f"ballot_probability needs at least {MIN_BALLOT_TRIALS} trials")
    runner = runner or TrialRunner()

    def trial_fn(trial: int):
        path = sample_walk(n, x, derive_generator(seed, TAG_WALK, trial, _WALK_BALLOT, n))
        return (float(path.running_min >= 0.0 and a <= path.end <= b),)

    report = EstimateReport.from_stats(
        runner.accumulate(trial_fn, trials, 1), 0, seed=seed, key=n, key_name="n", label=f"ballot n={n}"
    )
    if math.isfinite(b):
        report.bound_ratio = report.estimate / ballot_bound(n, x, a, b)
    if n == 1:
        report.extra["closed_form"] = ballot_closed_form(x, a, b)
    return report


def exp_sum(
    kappa: float,
    x: float,
    horizon: int,
    trials: int,
    *,
    seed: int = 0,
    runner: Optional[TrialRunner] = None,
) -> EstimateReport:
    """
    E_x[sum_{l=0}^{H} e^{-kappa S_l} 1{min_{1<=j<=l} S_j >= 0}] with S_0 = x,
    truncated at ``horizon``. The estimate at 2H comes from the same paths
    and decides ``stabilized``.
    """
    if kappa <= 0:
        raise ParameterError(f"kappa must be positive (got {kappa})")
    if x < 0:
        raise ParameterError(f"start must be non-negative (got {x})")
    if horizon < 1:
        raise ParameterError(f"horizon must be at least 1 (got {horizon})")
    runner = runner or TrialRunner()

    def trial_fn(trial: int):
        path = sample_walk(2 * horizon, x, derive_generator(seed, TAG_WALK, trial, _WALK_EXP_SUM, horizon))
        alive = np.minimum.accumulate(path.steps) >= 0.0
        terms = np.exp(-kappa * path.steps) * alive
        head = math.exp(-kappa * x) + float(terms[:horizon].sum())
        tail = float(terms[horizon:].sum())
        return head, head + tail, tail

    stats = runner.accumulate(trial_fn, trials, 3)
    report = EstimateReport.from_stats(
        stats, 0, seed=seed, key=x, key_name="x", label=f"exp_sum kappa={kappa:g}",
        truncation=f"sum truncated at horizon {horizon}",
    )
    doubled = EstimateReport.from_stats(stats, 1, seed=seed)
    increment = EstimateReport.from_stats(stats, 2, seed=seed)
    report.extra.update({
        "horizon": horizon,
        "estimate_2h": doubled.estimate,
        "std_error_2h": doubled.std_error,
        "stabilized": bool(increment.estimate <= 2.0 * max(report.std_error, increment.std_error)),
    })
    return report


def barrier_walk_bound(
    x: float,
    epsilon0: float,
    horizon: int,
    trials: int,
    *,
    seed: int = 0,
    runner: Optional[TrialRunner] = None,
) -> EstimateReport:
    """
    First-moment bound on the barrier crossing probability of the tree:
    E[e^{S_tau} 1{tau <= H}], tau the first j >= 1 with
    S_j <= -x + (1/2 - eps0) ln j, for the walk started at 0.
    """
    if horizon < 1:
        raise ParameterError(f"horizon must be at least 1 (got {horizon})")
    slope = 0.5 - epsilon0
    barrier = -x + slope * np.log(np.arange(1, horizon + 1, dtype=np.float64))
    runner = runner or TrialRunner()

    def trial_fn(trial: int):
        path = sample_walk(horizon, 0.0, derive_generator(seed, TAG_WALK, trial, _WALK_BARRIER, horizon))
        crossed = np.flatnonzero(path.steps <= barrier)
        if crossed.size == 0:
            return (0.0,)
        return (math.exp(path.steps[crossed[0]]),)

    report = EstimateReport.from_stats(
        runner.accumulate(trial_fn, trials, 1), 0, seed=seed, key=x, key_name="x",
        label="first-moment barrier bound", truncation=f"walk truncated at depth {horizon}",
    )
    report.bound_ratio = report.estimate * math.exp(x) / (1.0 + x)
    return report
