import pytest

from src.analyzers import measure
from src.services.identities import run_identities
from src.simulation.weights import ModelParams, ParameterError


@pytest.mark.parametrize("params", [ModelParams(0.7, 0.3), ModelParams(0.3, 0.3), ModelParams(0.9, 0.1)])
def test_identities_hold(params):
    result = run_identities(params, 10, seed=5)
    assert not result.identity_violation, result.summary["failed"]
    assert result.summary["passed"]
    assert len(result.checks) == 10


def test_identities_at_depth_one():
    result = run_identities(ModelParams(0.7, 0.3), 1, seed=0, samples=4)
    assert result.summary["passed"]


def test_identities_need_positive_depth():
    with pytest.raises(ParameterError):
        run_identities(ModelParams(0.7, 0.3), 0)


def test_broken_identity_is_reported(monkeypatch):
    monkeypatch.setattr(measure, "verify_cascade_recursion", lambda *args: 1.0)
    result = run_identities(ModelParams(0.7, 0.3), 6, seed=1)
    assert result.identity_violation
    assert result.summary["failed"] == ["cascade recursion"]
