"""Baseline models: horizon logistic regression and a point-estimate geometric.

The logistic baseline keeps its Hessian at the optimum so prediction
uncertainty can be read off a Laplace approximation of the posterior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg, optimize, special, stats

from .data import DataError, SurvivalData, as_data, label_at_horizon
from .linear import FORMAT_VERSION, TrainingError

FULL_HESSIAN_MAX_DIM = 200


@dataclass(frozen=True)
class LogisticConfig:
    l2_penalty: float = 1e-4
    gradient_tolerance: float = 1e-9
    max_iter: int = 200


@dataclass(frozen=True)
class GaussianScorePosterior:
    """Gaussian distribution of the linear score ``Y = theta . x``."""

    mu: float
    sigma2: float

    def __post_init__(self):
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be nonnegative")


@dataclass(frozen=True)
class LogisticModel:
    """Logistic regression for the label "event by ``horizon``".

    ``hessian_diag`` and ``hessian_full`` are the Hessian of the penalized
    loss at the optimum over ``[intercept, theta]`` (intercept first).
    """

    theta: np.ndarray
    intercept: float
    horizon: int
    hessian_diag: Optional[np.ndarray] = None
    hessian_full: Optional[np.ndarray] = None
    feature_names: tuple = ()

    @property
    def n_features(self) -> int:
        return self.theta.shape[0]

    def _design(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise DataError(f"model expects {self.n_features} features, got {X.shape[1]}")
        X = np.nan_to_num(X, nan=0.0)
        return np.column_stack([np.ones(X.shape[0]), X])

    def decision_function(self, X) -> np.ndarray:
        return self._design(X) @ np.concatenate([[self.intercept], self.theta])

    def predict_proba(self, X) -> np.ndarray:
        return special.expit(self.decision_function(X))

    def to_dict(self) -> dict:
        doc = {
            "version": FORMAT_VERSION,
            "model_type": "logistic",
            "feature_names": list(self.feature_names),
            "theta": self.theta.tolist(),
            "intercept": self.intercept,
            "horizon": self.horizon,
            "hessian_diag": None if self.hessian_diag is None else self.hessian_diag.tolist(),
            "hessian_full": None if self.hessian_full is None else self.hessian_full.tolist(),
        }
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "LogisticModel":
        def arr(key):
            return None if doc.get(key) is None else np.array(doc[key], dtype=float)

        return cls(np.array(doc["theta"], dtype=float), float(doc["intercept"]),
                   int(doc["horizon"]), arr("hessian_diag"), arr("hessian_full"),
                   tuple(doc["feature_names"]))


def _newton_logistic(Z, y, w, penalty, config):
    """Penalized logistic regression by damped Newton iterations."""
    n, p = Z.shape
    beta = np.zeros(p)
    W = float(np.sum(w))

    def loss(b):
        s = Z @ b
        return float(np.sum(w * (np.logaddexp(0.0, s) - y * s))) + 0.5 * float(b @ (penalty * b))

    current = loss(beta)
    for _ in range(config.max_iter):
        prob = special.expit(Z @ beta)
        grad = Z.T @ (w * (prob - y)) + penalty * beta
        if np.linalg.norm(grad) / W <= config.gradient_tolerance:
            return beta, True
        H = (Z * (w * prob * (1 - prob))[:, None]).T @ Z + np.diag(penalty)
        try:
            step = linalg.solve(H, grad, assume_a="pos")
        except linalg.LinAlgError:
            step = np.linalg.lstsq(H, grad, rcond=None)[0]
        t = 1.0
        while t > 1e-10:
            candidate = beta - t * step
            new = loss(candidate)
            if new <= current:
                break
            t *= 0.5
        beta, current = candidate, new
    prob = special.expit(Z @ beta)
    grad = Z.T @ (w * (prob - y)) + penalty * beta
    return beta, bool(np.linalg.norm(grad) / W <= config.gradient_tolerance)


def _lbfgs_logistic(Z, y, w, penalty, config):
    W = float(np.sum(w))

    def fun(b):
        s = Z @ b
        prob = special.expit(s)
        loss = float(np.sum(w * (np.logaddexp(0.0, s) - y * s))) + 0.5 * float(b @ (penalty * b))
        return loss / W, (Z.T @ (w * (prob - y)) + penalty * b) / W

    res = optimize.minimize(fun, np.zeros(Z.shape[1]), jac=True, method="L-BFGS-B",
                            options={"gtol": config.gradient_tolerance, "maxiter": 10_000})
    return res.x, bool(res.success)


def fit_logistic_at_horizon(observations, h: int, config: LogisticConfig = LogisticConfig()) -> LogisticModel:
    """Fit ``P(event by h | x)`` on rows whose label at ``h`` is known."""
    data = as_data(observations)
    keep, y = label_at_horizon(data, h)
    n_pos, n_neg = int(y.sum()), int(y.shape[0] - y.sum())
    if n_pos == 0 or n_neg == 0:
        raise TrainingError(
            f"labels at horizon {h} contain a single class "
            f"({n_pos} events, {n_neg} non-events)"
        )
    X = np.nan_to_num(data.X[keep], nan=0.0)
    w = data.weight[keep]
    Z = np.column_stack([np.ones(X.shape[0]), X])
    d = X.shape[1]
    penalty = np.full(d + 1, config.l2_penalty)
    penalty[0] = 0.0
    if d + 1 <= FULL_HESSIAN_MAX_DIM + 1:
        beta, _ = _newton_logistic(Z, y, w, penalty, config)
    else:
        beta, _ = _lbfgs_logistic(Z, y, w, penalty, config)
    prob = special.expit(Z @ beta)
    pq = w * prob * (1 - prob)
    hess_diag = (Z * Z).T @ pq + penalty
    hess_full = None
    if d <= FULL_HESSIAN_MAX_DIM:
        hess_full = (Z * pq[:, None]).T @ Z + np.diag(penalty)
    return LogisticModel(beta[1:].copy(), float(beta[0]), int(h), hess_diag, hess_full,
                         tuple(data.feature_names))


def laplace_score_posterior(model: LogisticModel, X, mode: str = "diagonal"):
    """Gaussian posterior of the score for each row of ``X``.

    Returns ``(mu, sigma2)`` arrays; ``mode`` is ``"diagonal"`` (independent
    coordinates with variances ``1 / hessian_diag``) or ``"full"``
    (``x^T H^{-1} x`` via a Cholesky solve).
    """
    Z = model._design(X)
    mu = Z @ np.concatenate([[model.intercept], model.theta])
    if mode == "diagonal":
        if model.hessian_diag is None:
            raise ValueError("model has no diagonal Hessian")
        sigma2 = (Z * Z) @ (1.0 / model.hessian_diag)
    elif mode == "full":
        if model.hessian_full is None:
            raise ValueError(
                f"full Hessian unavailable (stored only for d <= {FULL_HESSIAN_MAX_DIM})"
            )
        try:
            factor = linalg.cho_factor(model.hessian_full)
        except linalg.LinAlgError as exc:
            raise linalg.LinAlgError(
                "full Hessian is singular; refit with l2_penalty > 0"
            ) from exc
        sigma2 = np.einsum("ij,ji->i", Z, linalg.cho_solve(factor, Z.T))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return mu, np.maximum(sigma2, 0.0)


def sigmoid_gaussian_variance(mu, sigma2):
    """Approximate ``Var[sigmoid(Y)]`` for ``Y ~ N(mu, sigma2)``.

    ``Phi((pi*mu/sqrt(8) - 1) / sqrt(pi - 1 + pi^2 sigma2 / 8))`` approximates
    the second moment and ``(1 + exp(-mu / sqrt(1 + pi sigma2 / 8)))^-2`` the
    squared first moment. The raw difference can dip slightly below zero
    near ``sigma2 = 0``.
    """
    mu = np.asarray(mu, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    second = stats.norm.cdf(
        (math.pi * mu / math.sqrt(8.0) - 1.0) / np.sqrt(math.pi - 1.0 + math.pi ** 2 * sigma2 / 8.0)
    )
    first = special.expit(mu / np.sqrt(1.0 + math.pi * sigma2 / 8.0))
    return second - first ** 2


@dataclass(frozen=True)
class PredictionVariance:
    """Clipped variance with the raw approximation kept for diagnostics."""

    variance: np.ndarray
    raw: np.ndarray
    posterior_mu: np.ndarray
    posterior_sigma2: np.ndarray


def prediction_variance_details(model: LogisticModel, X, mode: str = "diagonal") -> PredictionVariance:
    mu, sigma2 = laplace_score_posterior(model, X, mode)
    raw = sigmoid_gaussian_variance(mu, sigma2)
    return PredictionVariance(np.clip(raw, 0.0, 0.25), raw, mu, sigma2)


def logistic_prediction_variance(model: LogisticModel, x, mode: str = "diagonal"):
    """Laplace-approximated variance of the predicted probability, in [0, 0.25].

    Scalar for a single feature vector, array for a matrix.
    """
    v = prediction_variance_details(model, x, mode).variance
    return float(v[0]) if np.ndim(x) == 1 else v


def score_posterior(model: LogisticModel, x, mode: str = "diagonal") -> GaussianScorePosterior:
    mu, sigma2 = laplace_score_posterior(model, np.asarray(x, dtype=float), mode)
    return GaussianScorePosterior(float(mu[0]), float(sigma2[0]))


class VarianceUndefinedError(TypeError):
    """The model yields point predictions without a posterior."""


@dataclass(frozen=True)
class GeometricModel:
    """Shifted geometric survival with ``theta(x) = sigmoid(w . x + b)``."""

    coef: np.ndarray
    intercept: float
    feature_names: tuple = ()

    @property
    def n_features(self) -> int:
        return self.coef.shape[0]

    def predict_theta(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise DataError(f"model expects {self.n_features} features, got {X.shape[1]}")
        return special.expit(np.nan_to_num(X, nan=0.0) @ self.coef + self.intercept)

    def survival(self, X, horizon: int) -> np.ndarray:
        theta = self.predict_theta(X)
        steps = np.arange(1, horizon + 1)
        return np.exp(steps[None, :] * np.log1p(-theta)[:, None])

    def predict_event_variance(self, x):
        raise VarianceUndefinedError(
            "the geometric baseline predicts a point probability; no variance is defined"
        )

    def to_dict(self) -> dict:
        return {"version": FORMAT_VERSION, "model_type": "geometric",
                "feature_names": list(self.feature_names),
                "coef": self.coef.tolist(), "intercept": self.intercept}

    @classmethod
    def from_dict(cls, doc: dict) -> "GeometricModel":
        return cls(np.array(doc["coef"], dtype=float), float(doc["intercept"]),
                   tuple(doc["feature_names"]))


def geometric_neg_log_likelihood(model: GeometricModel, observations) -> float:
    data = as_data(observations)
    s = np.nan_to_num(data.X, nan=0.0) @ model.coef + model.intercept
    log_theta = -np.logaddexp(0.0, -s)
    log_1m = -np.logaddexp(0.0, s)
    ll = np.where(data.censored, data.t * log_1m, log_theta + (data.t - 1) * log_1m)
    return float(-np.sum(data.weight * ll))


def fit_geometric_pointestimate(observations, config: LogisticConfig = LogisticConfig()):
    """Maximum-likelihood point-estimate geometric survival model.

    Returns ``(model, final_loss)``.
    """
    data = as_data(observations)
    if len(data) == 0 or np.all(data.censored):
        raise TrainingError(
            "all rows are censored: the geometric likelihood is maximized at theta = 0"
        )
    X = np.nan_to_num(data.X, nan=0.0)
    Z = np.column_stack([np.ones(len(data)), X])
    t = data.t.astype(float)
    event = (~data.censored).astype(float)
    w = data.weight
    W = float(np.sum(w))
    penalty = np.full(Z.shape[1], config.l2_penalty)
    penalty[0] = 0.0

    def loss(b):
        s = Z @ b
        log_theta = -np.logaddexp(0.0, -s)
        log_1m = -np.logaddexp(0.0, s)
        ll = event * log_theta + (t - event) * log_1m
        return float(-np.sum(w * ll)) + 0.5 * float(b @ (penalty * b))

    beta = np.zeros(Z.shape[1])
    current = loss(beta)
    for _ in range(config.max_iter):
        theta = special.expit(Z @ beta)
        # d/ds of the row log-likelihood is event - t * theta; curvature -t * theta * (1 - theta)
        grad = -Z.T @ (w * (event - t * theta)) + penalty * beta
        if np.linalg.norm(grad) / W <= config.gradient_tolerance:
            break
        H = (Z * (w * t * theta * (1 - theta))[:, None]).T @ Z + np.diag(penalty)
        step = np.linalg.lstsq(H, grad, rcond=None)[0]
        lr = 1.0
        while lr > 1e-10:
            candidate = beta - lr * step
            new = loss(candidate)
            if new <= current:
                break
            lr *= 0.5
        beta, current = candidate, new
    model = GeometricModel(beta[1:].copy(), float(beta[0]), tuple(data.feature_names))
    return model, current
