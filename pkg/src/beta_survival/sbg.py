"""Shifted-beta-geometric likelihood and its derivative recurrences.

With ``theta ~ Beta(alpha, beta)`` and ``T | theta`` shifted geometric,

    P(T = 1) = alpha / (alpha + beta)
    P(T = t) = P(T = t - 1) * (beta + t - 2) / (alpha + beta + t - 1)
    P(T > 1) = beta / (alpha + beta)
    P(T > t) = P(T > t - 1) * (beta + t - 1) / (alpha + beta + t - 1)

Everything here is carried in log space and differentiated with respect to
the log-parameters ``a = log(alpha)`` and ``b = log(beta)``. Derivatives are
those of the log-probability; losses negate them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .beta_math import BetaDomainError, BetaParams
from .data import SurvivalData, as_data

MAX_HORIZON = 10_000


@dataclass(frozen=True)
class SbgDerivatives:
    """First and diagonal second derivatives of ``log P`` in ``(a, b)``."""

    dlog_da: float
    dlog_db: float
    d2log_da2: float
    d2log_db2: float


@dataclass
class RowTerms:
    """Vectorized per-row log-probabilities and derivatives."""

    logp: np.ndarray
    ga: np.ndarray
    gb: np.ndarray
    ha: np.ndarray
    hb: np.ndarray


def _check_t(t, max_horizon: int, allow_zero: bool = False) -> np.ndarray:
    t = np.asarray(t)
    lowest = 0 if allow_zero else 1
    if t.size and (np.any(t < lowest) or np.any(t != np.round(t))):
        raise BetaDomainError(f"t must be an integer >= {lowest}")
    if t.size and np.max(t) > max_horizon:
        raise BetaDomainError(
            f"t={int(np.max(t))} exceeds the configured maximum horizon {max_horizon}"
        )
    return t.astype(np.int64)


def time_order(t) -> np.ndarray:
    """Row order by decreasing ``t``, reusable across :func:`row_terms` calls."""
    return np.argsort(-np.asarray(t), kind="stable")


def row_terms(alpha, beta, t, censored, max_horizon: int = MAX_HORIZON,
              derivatives: bool = True, order=None) -> RowTerms:
    """Evaluate the recurrences for many rows at once.

    Rows are visited in order of decreasing ``t`` so that at step ``u`` the
    rows still accumulating form a prefix; total work is ``sum(t)``.
    ``order`` may pass a precomputed :func:`time_order` of ``t``.
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    t = _check_t(t, max_horizon)
    cens = np.asarray(censored, dtype=bool)
    n = t.shape[0]

    s = alpha + beta
    logp = np.where(cens, np.log(beta), np.log(alpha)) - np.log(s)
    if derivatives:
        ga = np.where(cens, -alpha / s, beta / s)
        gb = -ga
        ha = -alpha * beta / (s * s)
        hb = ha.copy()
    else:
        ga = gb = ha = hb = None

    if order is None:
        order = time_order(t)
    t_sorted = t[order]
    max_t = int(t_sorted[0]) if n else 0
    a_o, b_o, s_o, c_o = alpha[order], beta[order], s[order], cens[order]
    # the (beta + u - k) factor uses k = 2 for events, k = 1 for survival
    shift = np.where(c_o, 1.0, 2.0)
    acc_logp = np.zeros(n)
    if derivatives:
        acc_ga, acc_gb = np.zeros(n), np.zeros(n)
        acc_ha, acc_hb = np.zeros(n), np.zeros(n)
        # numerator factor of the b-gradient step: alpha + 1 (events) or alpha
        a_fac = np.where(c_o, a_o, a_o + 1.0)
    neg_t = -t_sorted
    for u in range(2, max_t + 1):
        k = int(np.searchsorted(neg_t, -u, side="right"))
        a, b, sv, sh = a_o[:k], b_o[:k], s_o[:k], shift[:k]
        bu = b + (u - sh)
        su = sv + (u - 1)
        acc_logp[:k] += np.log(bu) - np.log(su)
        if derivatives:
            af = a_fac[:k]
            acc_ga[:k] -= a / su
            acc_gb[:k] += af * b / (bu * su)
            acc_ha[:k] -= a * (b + u - 1) / (su * su)
            acc_hb[:k] -= b * af * (b * b - (u - sh) * (a + u - 1)) / (bu * bu * su * su)

    inv = np.empty_like(order)
    inv[order] = np.arange(n)
    logp = logp + acc_logp[inv]
    if derivatives:
        ga = ga + acc_ga[inv]
        gb = gb + acc_gb[inv]
        ha = ha + acc_ha[inv]
        hb = hb + acc_hb[inv]
    return RowTerms(logp, ga, gb, ha, hb)


def log_pmf(alpha, beta, t, max_horizon: int = MAX_HORIZON) -> np.ndarray:
    t = np.asarray(t)
    return row_terms(alpha, beta, t, np.zeros(t.shape, bool), max_horizon, derivatives=False).logp


def log_survival(alpha, beta, t, max_horizon: int = MAX_HORIZON) -> np.ndarray:
    """``log P(T > t)``; ``t = 0`` gives 0."""
    t = _check_t(t, max_horizon, allow_zero=True)
    out = np.zeros(t.shape, dtype=float)
    pos = t > 0
    if np.any(pos):
        a = np.broadcast_to(np.asarray(alpha, dtype=float), t.shape)[pos]
        b = np.broadcast_to(np.asarray(beta, dtype=float), t.shape)[pos]
        out[pos] = row_terms(a, b, t[pos], np.ones(int(pos.sum()), bool), max_horizon,
                             derivatives=False).logp
    return out


def survival_curve(alpha, beta, horizon: int) -> np.ndarray:
    """``[P(T > 1), ..., P(T > horizon)]`` for each row, shape ``(n, horizon)``."""
    if horizon < 1:
        raise BetaDomainError("horizon must be >= 1")
    alpha = np.atleast_1d(np.asarray(alpha, dtype=float))
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    s = alpha + beta
    steps = np.arange(horizon)
    log_ratio = np.log(beta[:, None] + steps) - np.log(s[:, None] + steps)
    return np.exp(np.cumsum(log_ratio, axis=1))


def sbg_pmf(params: BetaParams, t: int) -> float:
    """``P(T = t | alpha, beta)``."""
    if t < 1:
        raise BetaDomainError(f"t must be >= 1, got {t}")
    return math.exp(float(log_pmf([params.alpha], [params.beta], [t])[0]))


def sbg_survival(params: BetaParams, t: int) -> float:
    """``P(T > t | alpha, beta)``, equal to 1 at ``t = 0``."""
    if t < 0:
        raise BetaDomainError(f"t must be >= 0, got {t}")
    return math.exp(float(log_survival([params.alpha], [params.beta], [t])[0]))


def param_arrays(params_per_row) -> tuple[np.ndarray, np.ndarray]:
    """Accept a list of :class:`BetaParams` or an ``(alpha, beta)`` array pair."""
    if isinstance(params_per_row, tuple) and len(params_per_row) == 2 and not isinstance(
        params_per_row[0], BetaParams
    ):
        return (np.asarray(params_per_row[0], dtype=float),
                np.asarray(params_per_row[1], dtype=float))
    plist = list(params_per_row)
    return (np.array([p.alpha for p in plist], dtype=float),
            np.array([p.beta for p in plist], dtype=float))


def sbg_neg_log_likelihood(observations, params_per_row) -> float:
    """Weighted censored negative log-likelihood of the rows."""
    data = as_data(observations)
    alpha, beta = param_arrays(params_per_row)
    if alpha.shape[0] != len(data):
        raise ValueError(
            f"{len(data)} observations but {alpha.shape[0]} parameter rows"
        )
    if len(data) == 0:
        return 0.0
    terms = row_terms(alpha, beta, data.t, data.censored, derivatives=False)
    return float(-np.sum(data.weight * terms.logp))


def sbg_derivatives(params: BetaParams, t: int, censored: bool) -> SbgDerivatives:
    if t < 1:
        raise BetaDomainError(f"t must be >= 1, got {t}")
    r = row_terms([params.alpha], [params.beta], [t], [censored])
    return SbgDerivatives(float(r.ga[0]), float(r.gb[0]), float(r.ha[0]), float(r.hb[0]))


@dataclass
class ConvexityReport:
    """Per-row curvature of the loss in the log-parameters.

    ``a_curvature``/``b_curvature`` are ``w * d2(-log P)/da2`` and
    ``w * d2(-log P)/db2`` per row. When the rows carry features,
    ``a_coordinate``/``b_coordinate`` hold the aggregated diagonal Hessian of
    a linear predictor, ``sum_i curvature_i * x_ij**2``.
    """

    a_curvature: np.ndarray
    b_curvature: np.ndarray
    a_coordinate: np.ndarray
    b_coordinate: np.ndarray

    @property
    def a_total(self) -> float:
        return float(np.sum(self.a_curvature))

    @property
    def b_total(self) -> float:
        return float(np.sum(self.b_curvature))

    @property
    def a_convex(self) -> bool:
        return bool(np.all(self.a_curvature >= 0))


def convexity_diagnostic(observations, params_per_row) -> ConvexityReport:
    data = as_data(observations)
    if len(data) == 0:
        d = data.n_features
        return ConvexityReport(np.zeros(0), np.zeros(0), np.zeros(d), np.zeros(d))
    alpha, beta = param_arrays(params_per_row)
    r = row_terms(alpha, beta, data.t, data.censored)
    a_curv = -data.weight * r.ha
    b_curv = -data.weight * r.hb
    X2 = np.nan_to_num(data.X) ** 2
    return ConvexityReport(a_curv, b_curv, a_curv @ X2, b_curv @ X2)
