"""Mergeable running statistics and compensated summation."""
from __future__ import annotations

import math
from typing import Optional, Tuple

import numpy as np

from src.utils.jit import njit


def neumaier_add(
    total: np.ndarray, carry: np.ndarray, values: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """Error-free accumulation of ``values`` into ``(total, carry)`` (elementwise)."""
    updated = total + values
    larger = np.abs(total) >= np.abs(values)
    carry = carry + np.where(larger, (total - updated) + values, (values - updated) + total)
    return updated, carry


@njit
def compensated_prefix_sums(values):
    """Return the ``len(values) + 1`` Neumaier-compensated prefix sums, starting at 0."""
    size = values.shape[0]
    out = np.empty(size + 1, dtype=np.float64)
    out[0] = 0.0
    total = 0.0
    carry = 0.0
    for i in range(size):
        value = values[i]
        updated = total + value
        if abs(total) >= abs(value):
            carry += (total - updated) + value
        else:
            carry += (value - updated) + total
        total = updated
        out[i + 1] = total + carry
    return out


class RunningStats:
    """
    Streaming mean / variance over fixed-width observation vectors.

    The sum is kept with a Neumaier carry, the second central moment with
    Welford updates, and two accumulators combine with Chan's pairwise
    formula, so splitting a sample into chunks and merging them in order
    reproduces the single-pass result up to reordering of the sums.
    Pass ``width=None`` for scalar observations.
    """

    def __init__(self, width: Optional[int] = None) -> None:
        shape = () if width is None else (int(width),)
        self.width = width
        self.count = 0
        self._sum = np.zeros(shape, dtype=np.float64)
        self._carry = np.zeros(shape, dtype=np.float64)
        self._m2 = np.zeros(shape, dtype=np.float64)
        self._max = np.full(shape, -np.inf, dtype=np.float64)

    def push(self, values) -> None:
        """Add one observation vector."""
        values = np.asarray(values, dtype=np.float64).reshape(self._sum.shape)
        previous_mean = self.mean if self.count else np.zeros_like(self._sum)
        self.count += 1
        self._sum, self._carry = neumaier_add(self._sum, self._carry, values)
        current_mean = self.mean
        self._m2 = self._m2 + (values - previous_mean) * (values - current_mean)
        self._max = np.maximum(self._max, values)

    def push_batch(self, rows) -> None:
        """Add a block of observations (one row each) with a vectorised two-pass update."""
        rows = np.asarray(rows, dtype=np.float64).reshape((-1,) + self._sum.shape)
        if rows.shape[0] == 0:
            return
        batch = RunningStats(self.width)
        batch.count = rows.shape[0]
        batch._sum = rows.sum(axis=0)
        batch._carry = np.zeros_like(batch._sum)
        centred = rows - batch._sum / batch.count
        batch._m2 = (centred * centred).sum(axis=0)
        batch._max = rows.max(axis=0)
        self.merge(batch)

    def merge(self, other: "RunningStats") -> "RunningStats":
        """Fold ``other`` into this accumulator (in place) and return self."""
        if other.count == 0:
            return self
        if self.count == 0:
            self.count = other.count
            self._sum = other._sum.copy()
            self._carry = other._carry.copy()
            self._m2 = other._m2.copy()
            self._max = other._max.copy()
            return self

        n1, n2 = self.count, other.count
        delta = other.mean - self.mean
        combined = n1 + n2
        self._m2 = self._m2 + other._m2 + delta * delta * (n1 * n2 / combined)
        self._sum, self._carry = neumaier_add(self._sum, self._carry, other._sum)
        self._sum, self._carry = neumaier_add(self._sum, self._carry, other._carry)
        self._max = np.maximum(self._max, other._max)
        self.count = combined
        return self

    def __add__(self, other: "RunningStats") -> "RunningStats":
        merged = RunningStats(self.width)
        merged.merge(self)
        merged.merge(other)
        return merged

    @property
    def total(self) -> np.ndarray:
        return self._sum + self._carry

    @property
    def mean(self) -> np.ndarray:
        if self.count == 0:
            return np.full_like(self._sum, np.nan)
        return self.total / self.count

    @property
    def var(self) -> np.ndarray:
        """Unbiased sample variance."""
        if self.count < 2:
            return np.zeros_like(self._sum)
        return np.maximum(self._m2, 0.0) / (self.count - 1)

    @property
    def std(self) -> np.ndarray:
        return np.sqrt(self.var)

    @property
    def sem(self) -> np.ndarray:
        """Standard error of the mean: sample SD / sqrt(count)."""
        if self.count == 0:
            return np.full_like(self._sum, np.nan)
        return self.std / math.sqrt(self.count)

    @property
    def peak(self) -> np.ndarray:
        return self._max
