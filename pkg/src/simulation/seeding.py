"""Deterministic seed derivation and per-depth random streams."""
from __future__ import annotations

from typing import Tuple

import numpy as np

from src.simulation.weights import V_MEAN, V_SD

# Stream families; every spawn key is (tag, trial, a, b) so keys never differ only in length.
TAG_TREE = 1
TAG_WALK = 2
TAG_AUX = 3
TAG_COPY = 4

_V_COMPONENT = 0
_X_COMPONENT = 1

UINT64_MAX = 2 ** 64 - 1


def validate_seed(master_seed: int) -> int:
    seed = int(master_seed)
    if not 0 <= seed <= UINT64_MAX:
        raise ValueError(f"seed must be a 64-bit unsigned integer (got {master_seed})")
    return seed


def derive_sequence(master_seed: int, tag: int, trial: int, a: int = 0, b: int = 0) -> np.random.SeedSequence:
    """Seed sequence for stream ``(tag, trial, a, b)`` under ``master_seed``."""
    return np.random.SeedSequence(validate_seed(master_seed), spawn_key=(tag, int(trial), int(a), int(b)))


def derive_generator(master_seed: int, tag: int, trial: int, a: int = 0, b: int = 0) -> np.random.Generator:
    """Counter-based (Philox) generator for stream ``(tag, trial, a, b)``."""
    return np.random.Generator(np.random.Philox(derive_sequence(master_seed, tag, trial, a, b)))


class DepthBuffer:
    """Sequential reader over the increments of one generation, refilled in small blocks."""

    def __init__(self, v_gen: np.random.Generator, x_gen: np.random.Generator, size: int) -> None:
        self._v_gen = v_gen
        self._x_gen = x_gen
        self._size = max(1, int(size))
        self._v = np.empty(0)
        self._x = np.empty(0)
        self._pos = 0

    def next(self) -> Tuple[float, float]:
        if self._pos >= self._v.shape[0]:
            self._v = V_MEAN + V_SD * self._v_gen.standard_normal(self._size)
            self._x = self._x_gen.standard_normal(self._size)
            self._pos = 0
        v_inc = self._v[self._pos]
        x_inc = self._x[self._pos]
        self._pos += 1
        return float(v_inc), float(x_inc)


class TreeStreams:
    """
    Random source of one cascade tree.

    Generation ``d`` reads two Philox streams keyed by ``(trial, d)``: node
    ``(d, k)`` takes the ``k``-th draw of each. Breadth mode reads a whole
    generation at once, stream mode reads the same streams sequentially
    in depth-first order, so both modes see identical increments.
    """

    def __init__(self, master_seed: int, trial: int = 0, tag: int = TAG_TREE) -> None:
        self.master_seed = validate_seed(master_seed)
        self.trial = int(trial)
        self.tag = tag

    def _generator(self, depth: int, component: int) -> np.random.Generator:
        return derive_generator(self.master_seed, self.tag, self.trial, depth, component)

    def generation(self, depth: int) -> Tuple[np.ndarray, np.ndarray]:
        """All ``2**depth`` increments (V part, X part) of generation ``depth``."""
        size = 2 ** depth
        v_inc = V_MEAN + V_SD * self._generator(depth, _V_COMPONENT).standard_normal(size)
        x_inc = self._generator(depth, _X_COMPONENT).standard_normal(size)
        return v_inc, x_inc

    def buffered(self, depth: int, buffer_size: int) -> DepthBuffer:
        return DepthBuffer(
            self._generator(depth, _V_COMPONENT),
            self._generator(depth, _X_COMPONENT),
            buffer_size,
        )

    def __repr__(self) -> str:
        return f"TreeStreams(master_seed={self.master_seed}, trial={self.trial}, tag={self.tag})"
