"""Node-weight law, criticality constants and the (gamma, beta) phase diagram."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Tuple, Union

import numpy as np

from src.enums import Phase
from src.estimates import EstimateReport
from src.utils.statistics import RunningStats

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)
# Real part of Theta: Normal(2 ln 2, 2 ln 2); imaginary part: Normal(0, 1).
V_MEAN = 2.0 * LN2
V_VARIANCE = 2.0 * LN2
V_SD = math.sqrt(V_VARIANCE)
# X is scaled by beta * sqrt(2 ln 2) in the complex weight.
IMAG_UNIT_SCALE = math.sqrt(2.0 * LN2)

BOUNDARY_TOLERANCE = 1e-12
MIN_CRITICALITY_TRIALS = 1000


class ParameterError(ValueError):
    """Raised for parameters outside an operation's domain."""


def classify_phase(gamma: float, beta: float) -> Phase:
    """
    Place (gamma, beta) on the phase diagram.

    The I/II boundary (gamma + beta = 1, 1/2 < gamma < 1) is tested first
    with an absolute tolerance; phase I is
    (gamma <= 1/2 and gamma^2 + beta^2 < 1/2) or (1/2 < gamma < 1 and gamma + beta < 1).
    Phases II and III are not told apart.
    """
    if gamma < 0 or beta < 0:
        raise ParameterError(f"gamma and beta must be non-negative (got {gamma}, {beta})")

    if 0.5 < gamma < 1.0 and abs(gamma + beta - 1.0) <= BOUNDARY_TOLERANCE:
        return Phase.BOUNDARY_I_II
    if gamma <= 0.5 and gamma * gamma + beta * beta < 0.5:
        return Phase.PHASE_I
    if 0.5 < gamma < 1.0 and gamma + beta < 1.0:
        return Phase.PHASE_I
    return Phase.OUTSIDE


def mean_factor(params: "ModelParams") -> float:
    """
    E[M_1] = 2 E[exp(-gamma V)] E[exp(i beta sqrt(2 ln 2) X)], from the Gaussian
    moment generating function; equals 2^(1 + gamma^2 - 2 gamma - beta^2).
    """
    real_part = math.exp(-params.gamma * V_MEAN + 0.5 * params.gamma ** 2 * V_VARIANCE)
    imag_part = math.exp(-0.5 * params.imag_scale ** 2)
    return 2.0 * real_part * imag_part


@dataclass(frozen=True)
class ModelParams:
    """The pair (gamma, beta) with its derived phase."""

    gamma: float
    beta: float
    phase: Phase = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "phase", classify_phase(self.gamma, self.beta))

    @classmethod
    def boundary(cls, gamma: float) -> "ModelParams":
        """Point of the I/II boundary with the given gamma."""
        return cls(gamma, 1.0 - gamma)

    @property
    def imag_scale(self) -> float:
        """Coefficient of X in the phase: beta * sqrt(2 ln 2)."""
        return self.beta * IMAG_UNIT_SCALE

    @property
    def mean_factor(self) -> float:
        return mean_factor(self)

    @property
    def on_boundary(self) -> bool:
        return self.phase is Phase.BOUNDARY_I_II

    def as_dict(self) -> dict:
        return {"gamma": self.gamma, "beta": self.beta, "phase": self.phase.value}


class ThetaSample(NamedTuple):
    """One increment (V part, X part) of a node weight."""

    v_inc: Union[float, np.ndarray]
    x_inc: Union[float, np.ndarray]


def sample_theta(rng: np.random.Generator) -> ThetaSample:
    """Draw one node weight; V and X parts are independent."""
    v_inc = V_MEAN + V_SD * rng.standard_normal()
    x_inc = rng.standard_normal()
    return ThetaSample(float(v_inc), float(x_inc))


def sample_theta_batch(rng: np.random.Generator, size) -> ThetaSample:
    """Vectorised :func:`sample_theta`; all V parts are drawn before the X parts."""
    v_inc = V_MEAN + V_SD * rng.standard_normal(size)
    x_inc = rng.standard_normal(size)
    return ThetaSample(v_inc, x_inc)


def leaf_weight(params: ModelParams, v, x):
    """exp(-gamma v + i beta sqrt(2 ln 2) x), elementwise."""
    v = np.asarray(v, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    return np.exp(-params.gamma * v) * np.exp(1j * params.imag_scale * x)


def criticality_check(
    trials: int,
    rng: np.random.Generator,
    *,
    seed: Optional[int] = None,
) -> Tuple[EstimateReport, EstimateReport]:
    """
    Estimate E[sum_{|z|=1} e^{-V(z)}] (should be 1) and
    E[sum_{|z|=1} V(z) e^{-V(z)}] (should be 0).
    """
    if trials < MIN_CRITICALITY_TRIALS:
        raise ParameterError(
            f"criticality_check needs at least {MIN_CRITICALITY_TRIALS} trials (got {trials})"
        )

    v = sample_theta_batch(rng, (trials, 2)).v_inc
    tilted = np.exp(-v)
    first = tilted.sum(axis=1)
    second = (v * tilted).sum(axis=1)

    stats = RunningStats(2)
    stats.push_batch(np.column_stack((first, second)))

    provenance = -1 if seed is None else seed
    total = EstimateReport.from_stats(stats, 0, seed=provenance, label="E[sum e^-V]", extra={"target": 1.0})
    derivative = EstimateReport.from_stats(stats, 1, seed=provenance, label="E[sum V e^-V]", extra={"target": 0.0})
    logger.debug("Criticality check over %s trials: %s, %s", trials, total.estimate, derivative.estimate)
    return total, derivative


def mean_factor_estimate(
    params: ModelParams,
    trials: int,
    rng: np.random.Generator,
    *,
    seed: Optional[int] = None,
) -> EstimateReport:
    """Complex Monte Carlo estimate of E[M_1], to compare with :func:`mean_factor`."""
    if trials < 2:
        raise ParameterError("mean_factor_estimate needs at least two trials")
    theta = sample_theta_batch(rng, (trials, 2))
    totals = leaf_weight(params, theta.v_inc, theta.x_inc).sum(axis=1)
    return EstimateReport.from_samples(
        totals,
        seed=-1 if seed is None else seed,
        label="E[M_1]",
        extra={"closed_form": params.mean_factor},
    )
