"""Monte Carlo estimate containers shared by every experiment."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from scipy.stats import linregress

from src.utils.statistics import RunningStats

Number = Union[float, complex]


@dataclass
class EstimateReport:
    """A Monte Carlo estimate with its standard error and provenance."""

    estimate: Number
    std_error: Number
    trials: int
    seed: int
    key: Optional[Union[int, float]] = None
    key_name: Optional[str] = None
    label: str = ""
    bound_ratio: Optional[float] = None
    truncation: Optional[str] = None
    zero_count: bool = False
    extra: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError("an estimate needs at least one trial")

    @classmethod
    def from_stats(
        cls,
        stats: RunningStats,
        index: Optional[int] = None,
        *,
        seed: int,
        imag_index: Optional[int] = None,
        **kwargs: Any,
    ) -> "EstimateReport":
        """
        Build a report from component ``index`` of ``stats``; when
        ``imag_index`` is given the two components form a complex estimate
        with componentwise standard errors.
        """
        mean = np.atleast_1d(stats.mean)
        sem = np.atleast_1d(stats.sem)
        idx = 0 if index is None else index
        if imag_index is None:
            estimate: Number = float(mean[idx])
            std_error: Number = float(sem[idx])
            zero = bool(stats.count > 0 and np.atleast_1d(stats.peak)[idx] == 0.0 and estimate == 0.0)
        else:
            estimate = complex(float(mean[idx]), float(mean[imag_index]))
            std_error = complex(float(sem[idx]), float(sem[imag_index]))
            zero = False
        kwargs.setdefault("zero_count", zero)
        return cls(estimate=estimate, std_error=std_error, trials=stats.count, seed=seed, **kwargs)

    @classmethod
    def from_samples(cls, samples: Sequence[Number], *, seed: int, **kwargs: Any) -> "EstimateReport":
        """Report the sample mean of real or complex samples."""
        values = np.asarray(samples)
        if values.size < 2:
            raise ValueError("need at least two samples for a standard error")
        if np.iscomplexobj(values):
            stats = RunningStats(2)
            stats.push_batch(np.column_stack((values.real.ravel(), values.imag.ravel())))
            return cls.from_stats(stats, 0, imag_index=1, seed=seed, **kwargs)
        stats = RunningStats(1)
        stats.push_batch(values.reshape(-1, 1))
        return cls.from_stats(stats, 0, seed=seed, **kwargs)

    def within(self, target: Number, n_se: float) -> bool:
        """True when ``target`` lies within ``n_se`` standard errors (componentwise)."""
        if isinstance(self.estimate, complex) or isinstance(target, complex):
            est = complex(self.estimate)
            se = complex(self.std_error)
            tgt = complex(target)
            return (
                abs(est.real - tgt.real) <= n_se * se.real
                and abs(est.imag - tgt.imag) <= n_se * se.imag
            )
        return abs(self.estimate - target) <= n_se * self.std_error

    def agrees_with(self, other: "EstimateReport", n_se: float) -> bool:
        """|self - other| <= n_se * (SE_self + SE_other)."""
        return abs(self.estimate - other.estimate) <= n_se * (
            abs(self.std_error) + abs(other.std_error)
        )

    def to_row(self) -> Dict[str, Any]:
        """Flat, JSON-serialisable row (complex values split into re/im)."""
        row: Dict[str, Any] = {"key": self.key}
        if self.key_name:
            row[self.key_name] = self.key
        row["label"] = self.label
        if isinstance(self.estimate, complex):
            row["estimate"] = {"re": self.estimate.real, "im": self.estimate.imag}
            se = complex(self.std_error)
            row["std_error"] = {"re": se.real, "im": se.imag}
        else:
            row["estimate"] = self.estimate
            row["std_error"] = self.std_error
        row["trials"] = self.trials
        row["seed"] = self.seed
        row["bound_ratio"] = self.bound_ratio
        row["truncation"] = self.truncation
        row["zero_count"] = self.zero_count
        if self.extra:
            row["extra"] = dict(self.extra)
        return row


@dataclass
class DecayFit:
    """Least-squares line through (abscissa, ordinate)."""

    abscissa: List[float]
    ordinate: List[float]
    slope: float
    intercept: float
    r_squared: float
    label: str = ""

    def residuals(self) -> np.ndarray:
        x = np.asarray(self.abscissa)
        return np.asarray(self.ordinate) - (self.slope * x + self.intercept)

    def normal_equation_error(self) -> float:
        """max(|sum r|, |sum r*x|) relative to the data scale; zero for an exact fit."""
        x = np.asarray(self.abscissa)
        r = self.residuals()
        scale = max(1.0, float(np.abs(self.ordinate).max()) * len(x), float(np.abs(x).max()) * len(x))
        return max(abs(float(r.sum())), abs(float((r * x).sum()))) / scale

    def to_row(self) -> Dict[str, Any]:
        return {
            "label": self.label,
            "abscissa": list(self.abscissa),
            "ordinate": list(self.ordinate),
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
        }


def fit_decay(abscissa: Sequence[float], ordinate: Sequence[float], label: str = "") -> DecayFit:
    """Ordinary least squares of ``ordinate`` on ``abscissa``."""
    x = np.asarray(abscissa, dtype=np.float64)
    y = np.asarray(ordinate, dtype=np.float64)
    if x.shape[0] < 2:
        raise ValueError("a decay fit needs at least two points")
    result = linregress(x, y)
    return DecayFit(
        abscissa=x.tolist(),
        ordinate=y.tolist(),
        slope=float(result.slope),
        intercept=float(result.intercept),
        r_squared=float(result.rvalue) ** 2,
        label=label,
    )
