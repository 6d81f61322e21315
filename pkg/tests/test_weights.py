import math

import numpy as np
import pytest

from src.enums import Phase
from src.simulation.weights import (
    LN2,
    ModelParams,
    ParameterError,
    classify_phase,
    criticality_check,
    leaf_weight,
    mean_factor,
    mean_factor_estimate,
    sample_theta,
    sample_theta_batch,
)


@pytest.mark.parametrize(
    "gamma,beta,expected",
    [
        (0.3, 0.3, Phase.PHASE_I),
        (0.7, 0.3, Phase.BOUNDARY_I_II),
        (0.6, 0.6, Phase.OUTSIDE),
        (0.6, 0.2, Phase.PHASE_I),
        (0.5, 0.5, Phase.OUTSIDE),
        (1.0, 0.0, Phase.OUTSIDE),
    ],
)
def test_classify_phase(gamma, beta, expected):
    assert classify_phase(gamma, beta) is expected


def test_boundary_uses_absolute_tolerance():
    assert classify_phase(0.7, 0.3 + 5e-13) is Phase.BOUNDARY_I_II
    assert classify_phase(0.7, 0.3 - 1e-9) is Phase.PHASE_I


def test_negative_parameters_rejected():
    with pytest.raises(ParameterError):
        classify_phase(-1.0, 0.3)
    with pytest.raises(ParameterError):
        ModelParams(0.5, -0.1)


def test_model_params_derives_phase():
    params = ModelParams.boundary(0.8)
    assert params.beta == pytest.approx(0.2)
    assert params.on_boundary
    assert params.as_dict()["phase"] == "boundary_i_ii"


@pytest.mark.parametrize(
    "gamma,beta,expected",
    [(0.7, 0.3, 1.0), (0.0, 0.0, 2.0), (1.0, 0.0, 1.0)],
)
def test_mean_factor_examples(gamma, beta, expected):
    assert mean_factor(ModelParams(gamma, beta)) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("gamma", [0.51, 0.6, 0.7, 0.85, 0.99])
def test_mean_factor_is_one_on_boundary(gamma):
    assert abs(ModelParams.boundary(gamma).mean_factor - 1.0) <= 1e-12


def test_mean_factor_matches_power_of_two():
    params = ModelParams(0.3, 0.3)
    expected = 2.0 ** (1 + 0.09 - 0.6 - 0.09)
    assert params.mean_factor == pytest.approx(expected, rel=1e-12)


def test_sample_theta_is_deterministic():
    rng_a = np.random.default_rng(11)
    rng_b = np.random.default_rng(11)
    pair_a = (sample_theta(rng_a), sample_theta(rng_a))
    pair_b = (sample_theta(rng_b), sample_theta(rng_b))
    assert pair_a == pair_b
    assert pair_a[0] != pair_a[1]


def test_theta_moments_match_law():
    theta = sample_theta_batch(np.random.default_rng(3), 1_000_000)
    v, x = theta.v_inc, theta.x_inc
    se_v = v.std(ddof=1) / math.sqrt(v.size)
    assert abs(v.mean() - 2 * LN2) <= 4 * se_v
    # Var(x^2) = 2 for a standard normal
    se_var = math.sqrt(2.0 / x.size)
    assert abs(x.var(ddof=1) - 1.0) <= 4 * se_var


def test_leaf_weight_modulus_ignores_imaginary_part():
    params = ModelParams(0.7, 0.3)
    w = leaf_weight(params, np.array([0.5, 1.5]), np.array([3.0, -2.0]))
    assert np.allclose(np.abs(w), np.exp(-0.7 * np.array([0.5, 1.5])))


def test_criticality_check_hits_targets():
    total, derivative = criticality_check(200_000, np.random.default_rng(5), seed=5)
    assert total.within(1.0, 4.0)
    assert derivative.within(0.0, 4.0)
    assert total.trials == 200_000
    assert total.seed == 5


@pytest.mark.parametrize("trials", [0, 999])
def test_criticality_check_rejects_small_samples(trials):
    with pytest.raises(ParameterError):
        criticality_check(trials, np.random.default_rng(0))


@pytest.mark.parametrize(
    "gamma,beta",
    [(0.7, 0.3), (0.3, 0.3), (0.0, 0.0), (1.0, 0.0), (0.6, 0.4)],
)
def test_mean_factor_estimate_agrees_with_closed_form(gamma, beta):
    params = ModelParams(gamma, beta)
    report = mean_factor_estimate(params, 100_000, np.random.default_rng(17))
    assert report.within(params.mean_factor, 4.5)
