import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from oracles import closed_form_logp, digamma_derivatives, integrated_pmf

from beta_survival.beta_math import BetaDomainError, BetaParams
from beta_survival.data import Observation, SurvivalData
from beta_survival.sbg import (MAX_HORIZON, convexity_diagnostic, log_pmf, log_survival,
                               row_terms, sbg_derivatives, sbg_neg_log_likelihood, sbg_pmf,
                               sbg_survival, survival_curve)

shape = st.floats(min_value=0.05, max_value=50.0)
GRID = (0.1, 0.5, 1.0, 2.0, 5.0, 10.0)


def test_uniform_prior_closed_forms():
    p = BetaParams(1, 1)
    assert sbg_pmf(p, 1) == pytest.approx(0.5, rel=1e-14)
    assert sbg_pmf(p, 2) == pytest.approx(1 / 6, rel=1e-14)
    assert sbg_pmf(p, 3) == pytest.approx(1 / 12, rel=1e-14)
    assert sbg_survival(p, 1) == pytest.approx(0.5, rel=1e-14)
    assert sbg_survival(p, 2) == pytest.approx(1 / 3, rel=1e-14)
    assert sbg_survival(BetaParams(2, 2), 1) == pytest.approx(0.5, rel=1e-14)
    assert sbg_survival(p, 0) == 1.0


def test_rejects_t_zero():
    with pytest.raises(BetaDomainError):
        sbg_pmf(BetaParams(1, 1), 0)
    with pytest.raises(BetaDomainError):
        sbg_derivatives(BetaParams(1, 1), 0, False)
    with pytest.raises(BetaDomainError):
        log_pmf([1.0], [1.0], [MAX_HORIZON + 1])


@pytest.mark.parametrize("a", [0.1, 1.0, 10.0])
@pytest.mark.parametrize("b", [0.5, 5.0])
@pytest.mark.parametrize("t", [1, 2, 7, 30])
def test_pmf_matches_quadrature(a, b, t):
    assert sbg_pmf(BetaParams(a, b), t) == pytest.approx(integrated_pmf(a, b, t), rel=1e-8)


@given(shape, shape, st.integers(min_value=1, max_value=500), st.booleans())
def test_recurrence_matches_beta_ratio(a, b, t, censored):
    got = row_terms([a], [b], [t], [censored], derivatives=False).logp[0]
    want = closed_form_logp(a, b, t, censored)
    assert got == pytest.approx(float(want), rel=1e-10, abs=1e-10)


@pytest.mark.parametrize("a", GRID)
@pytest.mark.parametrize("b", GRID)
def test_normalization(a, b):
    T = 200
    pmf = np.exp(log_pmf(np.full(T, a), np.full(T, b), np.arange(1, T + 1)))
    surv = math.exp(float(log_survival([a], [b], [T])[0]))
    assert pmf.sum() + surv == pytest.approx(1.0, abs=1e-10)


@given(shape, shape)
def test_survival_nonincreasing(a, b):
    curve = survival_curve([a], [b], 60)[0]
    assert np.all(np.diff(curve) <= 0)
    assert np.all(curve > 0) and curve[0] < 1


def test_survival_curve_matches_scalar():
    curve = survival_curve([1.7], [0.9], 12)[0]
    for t in range(1, 13):
        assert curve[t - 1] == pytest.approx(sbg_survival(BetaParams(1.7, 0.9), t), rel=1e-13)


def test_long_horizon_is_finite():
    logs = log_survival([0.5], [0.5], [MAX_HORIZON])
    assert np.isfinite(logs[0]) and logs[0] < 0


def test_neg_log_likelihood_examples():
    p = BetaParams(1, 1)
    assert sbg_neg_log_likelihood([Observation(1, False)], [p]) == pytest.approx(math.log(2))
    assert sbg_neg_log_likelihood([Observation(2, True)], [p]) == pytest.approx(math.log(3))
    two = sbg_neg_log_likelihood([Observation(2, True), Observation(2, True)], [p, p])
    assert two == pytest.approx(2 * math.log(3))
    weighted = sbg_neg_log_likelihood([Observation(2, True, weight=2.0)], [p])
    assert weighted == pytest.approx(two)
    with pytest.raises(ValueError):
        sbg_neg_log_likelihood([Observation(1, False)], [p, p])


def test_neg_log_likelihood_accepts_arrays():
    data = SurvivalData([1, 3, 2], [False, True, False], np.zeros((3, 0)))
    alpha, beta = np.array([1.0, 2.0, 0.5]), np.array([1.0, 3.0, 4.0])
    by_list = sbg_neg_log_likelihood(data, [BetaParams(a, b) for a, b in zip(alpha, beta)])
    assert sbg_neg_log_likelihood(data, (alpha, beta)) == by_list
    want = -closed_form_logp(alpha, beta, data.t, data.censored).sum()
    assert by_list == pytest.approx(want, rel=1e-12)


def test_derivative_base_cases():
    d = sbg_derivatives(BetaParams(1, 1), 1, False)
    assert (d.dlog_da, d.dlog_db) == (pytest.approx(0.5), pytest.approx(-0.5))
    d = sbg_derivatives(BetaParams(1, 1), 1, True)
    assert (d.dlog_da, d.dlog_db) == (pytest.approx(-0.5), pytest.approx(0.5))
    # both base-case second derivatives equal -alpha beta / (alpha + beta)^2
    d = sbg_derivatives(BetaParams(2, 3), 1, False)
    assert d.d2log_da2 == pytest.approx(-6 / 25) and d.d2log_db2 == pytest.approx(-6 / 25)


@pytest.mark.parametrize("censored", [False, True])
def test_derivatives_finite_differences(censored):
    a, b, h = math.log(1.7), math.log(0.9), 1e-5

    def lp(a_, b_):
        return float(closed_form_logp(math.exp(a_), math.exp(b_), 5, censored))

    d = sbg_derivatives(BetaParams(1.7, 0.9), 5, censored)
    assert d.dlog_da == pytest.approx((lp(a + h, b) - lp(a - h, b)) / (2 * h), rel=1e-6)
    assert d.dlog_db == pytest.approx((lp(a, b + h) - lp(a, b - h)) / (2 * h), rel=1e-6)
    up = sbg_derivatives(BetaParams(math.exp(a + h), 0.9), 5, censored)
    dn = sbg_derivatives(BetaParams(math.exp(a - h), 0.9), 5, censored)
    assert d.d2log_da2 == pytest.approx((up.dlog_da - dn.dlog_da) / (2 * h), rel=1e-6)
    up = sbg_derivatives(BetaParams(1.7, math.exp(b + h)), 5, censored)
    dn = sbg_derivatives(BetaParams(1.7, math.exp(b - h)), 5, censored)
    assert d.d2log_db2 == pytest.approx((up.dlog_db - dn.dlog_db) / (2 * h), rel=1e-6)


def test_derivatives_match_digamma_oracle(rng):
    n = 2000
    alpha = np.exp(rng.uniform(math.log(0.05), math.log(50), n))
    beta = np.exp(rng.uniform(math.log(0.05), math.log(50), n))
    t = rng.integers(1, 101, n)
    c = rng.random(n) < 0.5
    r = row_terms(alpha, beta, t, c)
    for got, want in zip((r.ga, r.gb, r.ha, r.hb), digamma_derivatives(alpha, beta, t, c)):
        np.testing.assert_allclose(got, want, rtol=1e-8, atol=1e-12)


def test_row_terms_order_independent(rng):
    n = 300
    alpha, beta = rng.uniform(0.1, 5, n), rng.uniform(0.1, 5, n)
    t, c = rng.integers(1, 20, n), rng.random(n) < 0.3
    whole = row_terms(alpha, beta, t, c)
    for i in (0, 17, 299):
        single = row_terms(alpha[i:i + 1], beta[i:i + 1], t[i:i + 1], c[i:i + 1])
        assert single.logp[0] == pytest.approx(whole.logp[i], rel=1e-13)
        assert single.hb[0] == pytest.approx(whole.hb[i], rel=1e-12, abs=1e-15)


@given(st.lists(st.tuples(shape, shape, st.integers(1, 60), st.booleans()), min_size=1,
                max_size=40))
def test_a_curvature_nonnegative(rows):
    alpha, beta, t, c = (np.array(v) for v in zip(*rows))
    data = SurvivalData(t, c, np.ones((len(rows), 1)))
    report = convexity_diagnostic(data, (alpha, beta))
    assert np.all(report.a_curvature >= -1e-12)
    assert report.a_coordinate[0] >= -1e-12


def test_b_curvature_can_be_negative():
    # at t = 1 the loss curvature in b is alpha beta / (alpha + beta)^2
    data = SurvivalData([1], [False], np.zeros((1, 0)))
    report = convexity_diagnostic(data, [BetaParams(0.2, 3.0)])
    assert report.b_curvature[0] == pytest.approx(0.6 / 3.2 ** 2)
    # a late event under a prior concentrated near theta = 1 bends the other way
    data = SurvivalData([12], [False], np.zeros((1, 0)))
    assert convexity_diagnostic(data, [BetaParams(2.0, 0.3)]).b_curvature[0] < 0


def test_convexity_empty():
    report = convexity_diagnostic(SurvivalData([], [], np.zeros((0, 2))), [])
    assert report.a_total == 0.0 and report.b_total == 0.0
    assert report.a_coordinate.shape == (2,)
