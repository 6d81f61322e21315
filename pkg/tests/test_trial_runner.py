import threading

import numpy as np
import pytest

from src.services.trial_runner import TrialRunner


def _trial(t):
    rng = np.random.default_rng(t)
    return rng.normal(), rng.exponential()


def test_chunks_cover_all_trials():
    runner = TrialRunner(threads=1, chunk_size=4)
    assert runner.chunks(10) == [(0, 4), (4, 8), (8, 10)]
    assert runner.chunks(0) == []


def test_map_keeps_trial_order():
    runner = TrialRunner(threads=3, chunk_size=2)
    assert runner.map(lambda t: t * t, 7) == [0, 1, 4, 9, 16, 25, 36]


@pytest.mark.parametrize("threads", [2, 4, 8])
def test_results_do_not_depend_on_thread_count(threads):
    single = TrialRunner(threads=1, chunk_size=16).accumulate(_trial, 200, 2)
    pooled = TrialRunner(threads=threads, chunk_size=16).accumulate(_trial, 200, 2)
    assert np.array_equal(single.mean, pooled.mean)
    assert np.array_equal(single.sem, pooled.sem)
    assert pooled.count == 200


def test_collect_matches_accumulate():
    runner = TrialRunner(threads=2, chunk_size=8)
    rows = [_trial(t) for t in range(50)]
    collected = TrialRunner.collect(rows, 2, 8)
    accumulated = runner.accumulate(_trial, 50, 2)
    assert np.array_equal(collected.mean, accumulated.mean)
    assert np.array_equal(collected.var, accumulated.var)


def test_pool_is_used_for_many_chunks():
    seen = set()

    def trial(t):
        seen.add(threading.get_ident())
        return (float(t),)

    stats = TrialRunner(threads=4, chunk_size=1, backend="thread").accumulate(trial, 40, 1)
    assert stats.mean[0] == pytest.approx(19.5)
    assert seen


def test_accumulate_needs_trials():
    with pytest.raises(ValueError):
        TrialRunner(threads=1).accumulate(_trial, 0, 2)


def test_defaults_come_from_config(monkeypatch):
    from src.config import Config

    monkeypatch.setattr(Config, "THREADS", 3)
    monkeypatch.setattr(Config, "CHUNK_SIZE", 5)
    runner = TrialRunner()
    assert runner.threads == 3
    assert runner.chunk_size == 5


def test_process_backend_matches_thread_backend():
    threaded = TrialRunner(threads=3, chunk_size=16, backend="thread").accumulate(_trial, 150, 2)
    forked = TrialRunner(threads=3, chunk_size=16, backend="process").accumulate(_trial, 150, 2)
    assert np.array_equal(threaded.mean, forked.mean)
    assert np.array_equal(threaded.var, forked.var)
    assert forked.count == 150


def test_process_backend_runs_closures_in_workers():
    offset = 10.0
    runner = TrialRunner(threads=2, chunk_size=3, backend="process")
    assert runner.map(lambda t: t + offset, 8) == [10.0 + t for t in range(8)]


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        TrialRunner(backend="cluster")


def test_backend_defaults_from_config(monkeypatch):
    from src.config import Config

    monkeypatch.setattr(Config, "WORKER_BACKEND", "thread")
    assert TrialRunner().backend == "thread"
