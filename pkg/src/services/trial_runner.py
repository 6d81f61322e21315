"""Chunked, worker-count independent execution of Monte Carlo trials."""
from __future__ import annotations

import logging
import multiprocessing
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from src.config import Config
from src.utils.statistics import RunningStats

logger = logging.getLogger(__name__)

T = TypeVar("T")

TrialFn = Callable[[int], Sequence[float]]

BACKENDS = ("process", "thread")

# Chunk callable of the pool being run. Forked workers inherit it, so trial
# closures never have to be pickled; only chunk bounds and results cross.
_ACTIVE_WORK: Optional[Callable[[Tuple[int, int]], object]] = None


def _run_active(bounds: Tuple[int, int]):
    return _ACTIVE_WORK(bounds)


def _fork_context():
    try:
        return multiprocessing.get_context("fork")
    except ValueError:
        return None


class TrialRunner:
    """
    Runs trials ``0 .. trials - 1`` in fixed-size chunks.

    Each chunk is accumulated in trial order and the chunk accumulators are
    merged in chunk order, so estimates depend on the chunk size but never
    on the number of workers or on the backend.

    The ``process`` backend forks a ``multiprocessing`` pool; trial bodies are
    numpy and Python code that holds the GIL, so threads only overlap inside
    the numba kernels. Platforms without ``fork`` fall back to threads.
    """

    def __init__(
        self,
        threads: Optional[int] = None,
        chunk_size: Optional[int] = None,
        backend: Optional[str] = None,
    ) -> None:
        self.threads = max(1, int(threads if threads is not None else Config.THREADS))
        self.chunk_size = max(1, int(chunk_size or Config.CHUNK_SIZE))
        self.backend = (backend or Config.WORKER_BACKEND).strip().lower()
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown worker backend {self.backend!r}")

    def chunks(self, trials: int) -> List[Tuple[int, int]]:
        return [(start, min(start + self.chunk_size, trials)) for start in range(0, trials, self.chunk_size)]

    def _map_chunks(self, work: Callable[[Tuple[int, int]], T], trials: int) -> List[T]:
        bounds = self.chunks(trials)
        if self.threads == 1 or len(bounds) == 1:
            return [work(b) for b in bounds]
        workers = min(self.threads, len(bounds))
        context = _fork_context() if self.backend == "process" else None
        if context is None:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                return list(pool.map(work, bounds))

        global _ACTIVE_WORK
        previous, _ACTIVE_WORK = _ACTIVE_WORK, work
        try:
            with context.Pool(workers) as pool:
                return pool.map(_run_active, bounds)
        finally:
            _ACTIVE_WORK = previous

    def map(self, trial_fn: Callable[[int], T], trials: int) -> List[T]:
        """Per-trial results, in trial order."""
        parts = self._map_chunks(lambda b: [trial_fn(t) for t in range(*b)], trials)
        return [item for part in parts for item in part]

    def accumulate(self, trial_fn: TrialFn, trials: int, width: int) -> RunningStats:
        """Mergeable statistics of the ``width``-vectors returned by ``trial_fn``."""
        if trials < 1:
            raise ValueError("need at least one trial")

        def work(bounds: Tuple[int, int]) -> RunningStats:
            stats = RunningStats(width)
            rows = np.array([np.asarray(trial_fn(t), dtype=np.float64) for t in range(*bounds)])
            stats.push_batch(rows.reshape(-1, width))
            return stats

        parts = self._map_chunks(work, trials)
        total = RunningStats(width)
        for part in parts:
            total.merge(part)
        logger.debug(
            "Accumulated %s trials in %s chunks on %s %s workers", trials, len(parts), self.threads, self.backend
        )
        return total

    @staticmethod
    def collect(rows: Sequence[Sequence[float]], width: int, chunk_size: int) -> RunningStats:
        """Accumulate precomputed rows with the same chunking as :meth:`accumulate`."""
        matrix = np.asarray(rows, dtype=np.float64).reshape(-1, width)
        total = RunningStats(width)
        for start in range(0, matrix.shape[0], chunk_size):
            part = RunningStats(width)
            part.push_batch(matrix[start:start + chunk_size])
            total.merge(part)
        return total
