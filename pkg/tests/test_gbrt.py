import json
import math

import numpy as np
import pytest

from beta_survival.beta_math import BetaParams
from beta_survival.data import DataError, SurvivalData
from beta_survival.gbrt import (GbrtBetaLogistic, GbrtConfig, Tree, custom_objective, fit_gbrt,
                                intercept_scores, predict_gbrt)
from beta_survival.linear import TrainingError
from beta_survival.sbg import sbg_derivatives, sbg_neg_log_likelihood, survival_curve
from beta_survival.simgen import TABLE1_COHORTS, gen_beta_geometric, gen_table1_mixture


def _walk(tree: Tree, x) -> tuple:
    node = 0
    while tree.feature[node] >= 0:
        v = x[tree.feature[node]]
        node = tree.left[node] if (np.isnan(v) or v <= tree.threshold[node]) else tree.right[node]
    return tree.delta_a[node], tree.delta_b[node]


def _covariate_data(n=3000, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1, 1, size=(n, 2))
    alpha = np.exp(0.2 + 1.2 * (X[:, 0] > 0))
    beta = np.exp(1.0 - 0.8 * X[:, 1])
    t = rng.geometric(rng.beta(alpha, beta))
    return SurvivalData(np.minimum(t, 8), t > 8, X)


def test_callbacks_equal_negated_derivatives(rng):
    n = 1000
    preds = rng.normal(scale=1.5, size=(n, 2))
    t = rng.integers(1, 40, n)
    c = rng.random(n) < 0.4
    grad, hess = custom_objective(preds, t, c)
    for i in range(n):
        alpha, beta = np.exp(preds[i])
        d = sbg_derivatives(BetaParams(float(alpha), float(beta)), int(t[i]),
                            bool(c[i]))
        assert grad[i, 0] == -d.dlog_da and grad[i, 1] == -d.dlog_db
        assert hess[i, 0] == -d.d2log_da2 and hess[i, 1] == -d.d2log_db2


def test_zero_rounds_is_intercept_fit():
    data = _covariate_data()
    model = fit_gbrt(data, GbrtConfig(rounds=0))
    assert model.trees == ()
    assert model.base_scores == pytest.approx(intercept_scores(data))
    empty = GbrtBetaLogistic((), 0.1, (0.0, 0.0), 3, ("x",))
    assert predict_gbrt(empty, [0.3]) == BetaParams(1.0, 1.0)


def test_ensemble_matches_manual_walk():
    data = _covariate_data()
    model = fit_gbrt(data, GbrtConfig(rounds=5, max_depth=3))
    X = data.X[:10].copy()
    X[3, 0] = np.nan
    raw = model.raw_scores(X)
    for i in range(10):
        manual = np.array(model.base_scores, dtype=float)
        for tree in model.trees:
            manual += model.learning_rate * np.array(_walk(tree, X[i]))
        np.testing.assert_array_equal(raw[i], manual)


def test_missing_values_route_left():
    tree = Tree((0, -1, -1), (0.5, 0.0, 0.0), (1, -1, -1), (2, -1, -1),
                (0.0, -1.0, 1.0), (0.0, -2.0, 2.0))
    out = tree.predict(np.array([[np.nan], [0.2], [0.9]]))
    np.testing.assert_array_equal(out, [[-1, -2], [-1, -2], [1, 2]])


def test_params_within_clamp():
    tree = Tree((-1,), (0.0,), (-1,), (-1,), (500.0,), (-500.0,))
    model = GbrtBetaLogistic((tree,), 1.0, (0.0, 0.0), 0, ("x",))
    p = predict_gbrt(model, [1.0])
    assert p.alpha == pytest.approx(math.exp(30)) and p.beta == pytest.approx(math.exp(-30))
    with pytest.raises(DataError):
        predict_gbrt(model, [1.0, 2.0])


def test_first_split_reduces_loss():
    rng = np.random.default_rng(4)
    x = rng.uniform(0, 1, 4000)
    alpha = np.exp(-1.0 + 2.0 * x)
    t = rng.geometric(rng.beta(alpha, 2.0))
    data = SurvivalData(np.minimum(t, 6), t > 6, x[:, None])
    model, losses = fit_gbrt(data, GbrtConfig(rounds=1, max_depth=1), return_losses=True)
    assert model.trees[0].feature[0] == 0
    assert losses[1] < losses[0]


def test_losses_nonincreasing():
    data = _covariate_data(seed=3)
    _, losses = fit_gbrt(data, GbrtConfig(rounds=40, learning_rate=0.1, max_depth=2),
                         return_losses=True)
    assert np.all(np.diff(losses) <= 1e-9 * abs(losses[0]))
    table = gen_table1_mixture(3000, 4, seed=2)
    _, losses = fit_gbrt(table, GbrtConfig(rounds=30, learning_rate=0.1, max_depth=2),
                         return_losses=True)
    assert np.all(np.diff(losses) <= 1e-9 * abs(losses[0]))


def test_depth_zero_converges_to_intercept_fit():
    data = gen_beta_geometric(BetaParams(1, 1), 10_000, 10, seed=8)
    data = SurvivalData(data.t, data.censored, np.random.default_rng(0).normal(size=(10_000, 1)))
    model = fit_gbrt(data, GbrtConfig(rounds=500, max_depth=0))
    a0, b0 = intercept_scores(data)
    base = sbg_neg_log_likelihood(data, (np.full(len(data), math.exp(a0)),
                                         np.full(len(data), math.exp(b0))))
    assert abs(sbg_neg_log_likelihood(data, model.params(data.X)) - base) < 1e-3


def test_constant_features_give_stump_free_trees():
    data = gen_beta_geometric(BetaParams(2, 5), 2000, 6, seed=1)
    data = SurvivalData(data.t, data.censored, np.ones((2000, 3)))
    model = fit_gbrt(data, GbrtConfig(rounds=5))
    assert all(tree.feature == (-1,) for tree in model.trees)


def test_ties_prefer_lower_feature_index():
    data = _covariate_data()
    X = np.column_stack([data.X[:, 0], data.X[:, 0]])
    model = fit_gbrt(SurvivalData(data.t, data.censored, X), GbrtConfig(rounds=1, max_depth=1))
    assert model.trees[0].feature[0] == 0


def test_training_errors():
    with pytest.raises(TrainingError):
        fit_gbrt(SurvivalData([3, 3], [True, True], np.zeros((2, 1))))
    with pytest.raises(ValueError):
        GbrtConfig(learning_rate=0)


def test_json_round_trip():
    data = _covariate_data()
    model = fit_gbrt(data, GbrtConfig(rounds=3))
    doc = json.loads(json.dumps(model.to_dict()))
    assert set(doc["trees"][0][0]) == {"feature_index", "threshold", "left", "right",
                                       "leaf_delta_a", "leaf_delta_b"}
    back = GbrtBetaLogistic.from_dict(doc)
    np.testing.assert_array_equal(back.raw_scores(data.X), model.raw_scores(data.X))


def test_deterministic():
    data = _covariate_data()
    m1 = fit_gbrt(data, GbrtConfig(rounds=4))
    m2 = fit_gbrt(data, GbrtConfig(rounds=4))
    assert m1.to_dict() == m2.to_dict()


@pytest.mark.slow
def test_table1_group_survival_recovery():
    # one-hot groups; diagonal Newton leaves move slowly along the (a, b)
    # ridge of the concentrated cohort, hence the larger step and round count
    data = gen_table1_mixture(33_334, 4, seed=11)
    model = fit_gbrt(data, GbrtConfig(rounds=300, learning_rate=0.5, max_depth=2))
    for i, cohort in enumerate(TABLE1_COHORTS):
        alpha, beta = model.params(np.eye(3)[i][None, :])
        fitted = survival_curve(alpha, beta, 4)[0]
        true = survival_curve([cohort.params.alpha], [cohort.params.beta], 4)[0]
        assert np.max(np.abs(fitted - true)) < 0.02
