import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import linalg, special

from beta_survival.baselines import (GaussianScorePosterior, GeometricModel, LogisticConfig,
                                     LogisticModel, VarianceUndefinedError,
                                     fit_geometric_pointestimate, fit_logistic_at_horizon,
                                     geometric_neg_log_likelihood, laplace_score_posterior,
                                     logistic_prediction_variance, prediction_variance_details,
                                     score_posterior, sigmoid_gaussian_variance)
from beta_survival.data import SurvivalData
from beta_survival.evalkit import auc_from_labels, fit_sbg_cohort
from beta_survival.linear import TrainingError
from beta_survival.simgen import gen_table1_mixture

from oracles import mc_sigmoid_gaussian_variance


def _binary(X, y, weight=None):
    """One-step rows: y = 1 is an event at t = 1, y = 0 is censored at t = 1."""
    y = np.asarray(y, dtype=bool)
    return SurvivalData(np.ones(y.shape[0], dtype=np.int64), ~y, X, weight)


def _factorial_design(d=3):
    points = np.array(list(itertools.product([-1.0, 1.0], repeat=d)))
    # every design point gets two events and one non-event: constant probability 2/3
    X = np.repeat(points, 3, axis=0)
    y = np.tile([1, 1, 0], points.shape[0])
    return X, y


def test_separable_data_ranks_perfectly():
    X = np.array([[-2.0], [-1.0], [-0.5], [0.5], [1.0], [2.0]])
    y = np.array([0, 0, 0, 1, 1, 1])
    model = fit_logistic_at_horizon(_binary(X, y), 1)
    assert auc_from_labels(model.predict_proba(X), y) == 1.0
    assert model.theta[0] > 0


def test_labeling_rule():
    # t=2 censored at h=3 is dropped; t=3 censored at h=3 counts as a non-event
    data = SurvivalData([1, 2, 3, 3, 4, 2], [0, 1, 1, 0, 0, 0], np.zeros((6, 0)))
    model = fit_logistic_at_horizon(data, 3)
    # labels kept: 1, 0, 1, 0, 1 -> rate 3/5
    assert special.expit(model.intercept) == pytest.approx(3 / 5, rel=1e-6)


def test_single_class_raises_with_counts():
    data = SurvivalData([1, 2, 3], [0, 0, 0], np.zeros((3, 1)))
    with pytest.raises(TrainingError, match="3 events, 0 non-events"):
        fit_logistic_at_horizon(data, 3)


def test_coefficient_recovery():
    rng = np.random.default_rng(2024)
    n, d = 100_000, 5
    true = np.array([0.8, -0.5, 0.3, 0.0, -1.0])
    X = rng.normal(size=(n, d))
    y = rng.random(n) < special.expit(-0.4 + X @ true)
    model = fit_logistic_at_horizon(_binary(X, y), 1)
    np.testing.assert_allclose(model.theta, true, atol=0.05)
    assert model.intercept == pytest.approx(-0.4, abs=0.05)
    assert model.hessian_full.shape == (d + 1, d + 1)
    np.testing.assert_allclose(np.diag(model.hessian_full), model.hessian_diag)


def test_hessian_diagonal_nonnegative(rng):
    X = rng.normal(size=(400, 4))
    y = rng.random(400) < 0.3
    model = fit_logistic_at_horizon(_binary(X, y), 1)
    assert np.all(model.hessian_diag >= 0)
    assert np.all(np.linalg.eigvalsh(model.hessian_full) > 0)


def test_full_hessian_gated_by_dimension(rng):
    n, d = 600, 201
    X = rng.normal(size=(n, d)) * 0.1
    y = rng.random(n) < 0.4
    model = fit_logistic_at_horizon(_binary(X, y), 1, LogisticConfig(l2_penalty=1.0))
    assert model.hessian_full is None and model.hessian_diag.shape == (d + 1,)
    with pytest.raises(ValueError, match="full Hessian unavailable"):
        logistic_prediction_variance(model, X[0], "full")


def test_variance_at_zero_uncertainty_is_clipped():
    raw = float(sigmoid_gaussian_variance(0.0, 0.0))
    # the approximation undershoots slightly at sigma = 0
    assert -0.01 < raw < 0
    model = LogisticModel(np.zeros(1), 0.0, 1, np.array([1e300, 1e300]))
    details = prediction_variance_details(model, np.array([[0.0]]))
    assert details.variance[0] == 0.0 and details.raw[0] == pytest.approx(raw)
    assert logistic_prediction_variance(model, np.array([0.0])) == 0.0


def test_variance_matches_monte_carlo_at_unit_variance():
    approx = float(sigmoid_gaussian_variance(0.0, 1.0))
    assert approx == pytest.approx(mc_sigmoid_gaussian_variance(0.0, 1.0), abs=0.01)


@given(st.floats(-4, 4), st.floats(0.05, 4))
def test_variance_within_bounds(mu, sigma2):
    model = LogisticModel(np.ones(1), mu, 1, np.array([1e300, 1.0 / sigma2]))
    v = logistic_prediction_variance(model, np.array([1.0]))
    assert 0.0 <= v <= 0.25
    post = score_posterior(model, [1.0])
    assert post.mu == pytest.approx(mu + 1.0) and post.sigma2 == pytest.approx(sigma2)


def test_gaussian_posterior_rejects_negative_variance():
    with pytest.raises(ValueError):
        GaussianScorePosterior(0.0, -1e-3)


def test_diagonal_equals_full_for_orthogonal_features():
    X, y = _factorial_design(3)
    model = fit_logistic_at_horizon(_binary(X, y), 1, LogisticConfig(l2_penalty=0.0))
    np.testing.assert_allclose(model.theta, 0.0, atol=1e-10)
    off = model.hessian_full - np.diag(np.diag(model.hessian_full))
    assert np.max(np.abs(off)) < 1e-10
    grid = np.random.default_rng(5).normal(size=(50, 3))
    diag = logistic_prediction_variance(model, grid, "diagonal")
    full = logistic_prediction_variance(model, grid, "full")
    np.testing.assert_allclose(diag, full, atol=1e-8)


def test_full_mode_matches_explicit_inverse(rng):
    X = rng.normal(size=(500, 6)) @ rng.normal(size=(6, 6))
    y = rng.random(500) < special.expit(X[:, 0] * 0.3)
    model = fit_logistic_at_horizon(_binary(X, y), 1)
    grid = rng.normal(size=(40, 6))
    Z = np.column_stack([np.ones(40), grid])
    mu = Z @ np.concatenate([[model.intercept], model.theta])
    sigma2 = np.einsum("ij,jk,ik->i", Z, np.linalg.inv(model.hessian_full), Z)
    expected = np.clip(sigmoid_gaussian_variance(mu, sigma2), 0, 0.25)
    np.testing.assert_allclose(logistic_prediction_variance(model, grid, "full"), expected,
                               atol=1e-8)


def test_singular_full_hessian_suggests_penalty():
    model = LogisticModel(np.zeros(2), 0.0, 1, np.ones(3), np.ones((3, 3)))
    with pytest.raises(linalg.LinAlgError, match="l2_penalty > 0"):
        logistic_prediction_variance(model, np.array([1.0, 2.0]), "full")


def test_logistic_json_round_trip(rng):
    X = rng.normal(size=(300, 2))
    y = rng.random(300) < 0.5
    model = fit_logistic_at_horizon(_binary(X, y), 1)
    back = LogisticModel.from_dict(json.loads(json.dumps(model.to_dict())))
    grid = rng.normal(size=(20, 2))
    np.testing.assert_array_equal(back.predict_proba(grid), model.predict_proba(grid))
    np.testing.assert_array_equal(logistic_prediction_variance(back, grid, "full"),
                                  logistic_prediction_variance(model, grid, "full"))
    assert back.horizon == 1 and back.to_dict()["model_type"] == "logistic"


def test_geometric_recovers_constant_rate():
    rng = np.random.default_rng(77)
    t = rng.geometric(0.3, size=100_000)
    data = SurvivalData(np.minimum(t, 50), t > 50, np.zeros((t.shape[0], 0)))
    model, loss = fit_geometric_pointestimate(data)
    assert model.predict_theta(np.zeros((1, 0)))[0] == pytest.approx(0.3, abs=0.01)
    assert loss == pytest.approx(geometric_neg_log_likelihood(model, data), rel=1e-12)


def test_geometric_closed_form_mle(rng):
    # without features the MLE is events / exposure
    t = rng.integers(1, 8, size=500)
    censored = rng.random(500) < 0.3
    data = SurvivalData(t, censored, np.zeros((500, 0)))
    model, _ = fit_geometric_pointestimate(data)
    expected = np.sum(~censored) / np.sum(t)
    assert model.predict_theta(np.zeros((1, 0)))[0] == pytest.approx(expected, rel=1e-8)


def test_geometric_table1_groups_share_one_step_rate():
    one_step = gen_table1_mixture(100_000, censor_horizon=1, seed=11)
    model, _ = fit_geometric_pointestimate(one_step)
    theta = model.predict_theta(np.eye(3))
    np.testing.assert_allclose(theta, 0.25, atol=0.005)
    # with more steps observed the point rate absorbs the mover/stayer selection while
    # the cohort priors stay distinguishable
    data = gen_table1_mixture(100_000, censor_horizon=4, seed=11)
    model4, _ = fit_geometric_pointestimate(data)
    theta4 = model4.predict_theta(np.eye(3))
    assert theta4[0] > theta4[1] > theta4[2]
    fits = [fit_sbg_cohort(data.subset(data.X[:, g] == 1)).params for g in range(3)]
    assert fits[0].alpha > 10 * fits[2].alpha
    for p in fits:
        assert p.alpha / (p.alpha + p.beta) == pytest.approx(0.25, abs=0.02)


def test_geometric_variance_is_undefined():
    model = GeometricModel(np.zeros(1), 0.0)
    with pytest.raises(VarianceUndefinedError):
        model.predict_event_variance([0.0])
    assert isinstance(VarianceUndefinedError(), TypeError)


def test_geometric_all_censored_raises():
    data = SurvivalData([3, 4], [1, 1], np.zeros((2, 0)))
    with pytest.raises(TrainingError, match="censored"):
        fit_geometric_pointestimate(data)


def test_geometric_json_round_trip_and_survival(rng):
    X = rng.normal(size=(800, 2))
    theta = special.expit(-1 + X @ np.array([0.5, -0.5]))
    t = rng.geometric(theta)
    data = SurvivalData(np.minimum(t, 6), t > 6, X)
    model, _ = fit_geometric_pointestimate(data)
    back = GeometricModel.from_dict(json.loads(json.dumps(model.to_dict())))
    np.testing.assert_array_equal(back.predict_theta(X), model.predict_theta(X))
    surv = model.survival(X[:3], 4)
    th = model.predict_theta(X[:3])
    np.testing.assert_allclose(surv, (1 - th)[:, None] ** np.arange(1, 5), rtol=1e-12)


def test_laplace_posterior_shapes(rng):
    X = rng.normal(size=(200, 3))
    y = rng.random(200) < 0.5
    model = fit_logistic_at_horizon(_binary(X, y), 1)
    mu, s2 = laplace_score_posterior(model, X[:7], "diagonal")
    assert mu.shape == s2.shape == (7,) and np.all(s2 > 0)
    with pytest.raises(ValueError, match="unknown mode"):
        laplace_score_posterior(model, X[:7], "blockwise")
    assert math.isfinite(logistic_prediction_variance(model, X[0], "full"))
