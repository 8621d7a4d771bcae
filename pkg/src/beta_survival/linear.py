"""Beta-logistic survival regression with linear predictors.

``alpha(x) = exp(gamma_a . x + intercept_a)`` and
``beta(x) = exp(gamma_b . x + intercept_b)``, fit by empirical Bayes
(maximizing the marginal censored likelihood).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy import optimize

from .beta_math import BetaParams
from .data import DataError, SurvivalData, as_data
from .sbg import row_terms, survival_curve, time_order

logger = logging.getLogger(__name__)

SCORE_CLAMP = 30.0
FORMAT_VERSION = 1


class TrainingError(RuntimeError):
    """The training problem is ill-posed or the optimizer failed."""


@dataclass(frozen=True)
class FitConfig:
    """Optimizer settings for :func:`fit_linear`.

    ``gradient_tolerance`` applies to the gradient of the penalized loss
    divided by the total sample weight, so it does not scale with ``n``.
    With ``batch_size="full"`` the default ``optimizer="lbfgs"`` runs
    scipy's L-BFGS on the full objective, and ``optimizer="gd"`` runs
    gradient descent with backtracking line search (optionally diagonally
    Newton-scaled). An integer ``batch_size`` runs shuffled mini-batch SGD
    at a fixed ``learning_rate``.
    """

    learning_rate: float = 1.0
    max_epochs: int = 5000
    l2_penalty: float = 1e-4
    gradient_tolerance: float = 1e-7
    batch_size: Union[int, str] = "full"
    use_diag_newton: bool = False
    seed: int = 0
    optimizer: str = "lbfgs"

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not self.gradient_tolerance > 0:
            raise ValueError("gradient_tolerance must be positive")
        if self.l2_penalty < 0:
            raise ValueError("l2_penalty must be nonnegative")
        if self.batch_size != "full" and (int(self.batch_size) < 1):
            raise ValueError("batch_size must be 'full' or a positive integer")
        if self.optimizer not in ("gd", "lbfgs"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class TrainingReport:
    losses: list = field(default_factory=list)
    grad_norm: float = float("nan")
    epochs: int = 0
    converged: bool = False
    message: str = ""

    @property
    def final_loss(self) -> float:
        return self.losses[-1] if self.losses else float("nan")


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LinearBetaLogistic:
    gamma_a: np.ndarray
    gamma_b: np.ndarray
    intercept_a: float = 0.0
    intercept_b: float = 0.0
    feature_names: tuple = ()
    clamp: float = SCORE_CLAMP

    def __post_init__(self):
        ga, gb = _frozen(self.gamma_a), _frozen(self.gamma_b)
        if ga.shape != gb.shape or ga.ndim != 1:
            raise ValueError(f"gamma_a {ga.shape} and gamma_b {gb.shape} must match")
        names = tuple(self.feature_names) or tuple(f"x{j}" for j in range(ga.shape[0]))
        if len(names) != ga.shape[0]:
            raise ValueError("feature_names must match the coefficient dimension")
        object.__setattr__(self, "gamma_a", ga)
        object.__setattr__(self, "gamma_b", gb)
        object.__setattr__(self, "intercept_a", float(self.intercept_a))
        object.__setattr__(self, "intercept_b", float(self.intercept_b))
        object.__setattr__(self, "feature_names", names)

    @property
    def n_features(self) -> int:
        return self.gamma_a.shape[0]

    @classmethod
    def zeros(cls, d: int, feature_names=()) -> "LinearBetaLogistic":
        return cls(np.zeros(d), np.zeros(d), 0.0, 0.0, tuple(feature_names))

    def _check_X(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise DataError(
                f"model expects {self.n_features} features, got {X.shape[1]}"
            )
        # missing cells contribute nothing to the linear scores
        return np.nan_to_num(X, nan=0.0)

    def scores(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Clamped linear predictors ``(a(x), b(x))``."""
        X = self._check_X(X)
        a = np.clip(X @ self.gamma_a + self.intercept_a, -self.clamp, self.clamp)
        b = np.clip(X @ self.gamma_b + self.intercept_b, -self.clamp, self.clamp)
        return a, b

    def params(self, X) -> tuple[np.ndarray, np.ndarray]:
        a, b = self.scores(X)
        return np.exp(a), np.exp(b)

    def to_dict(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "model_type": "betalogistic-linear",
            "feature_names": list(self.feature_names),
            "gamma_a": self.gamma_a.tolist(),
            "gamma_b": self.gamma_b.tolist(),
            "intercept_a": self.intercept_a,
            "intercept_b": self.intercept_b,
            "clamp": self.clamp,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LinearBetaLogistic":
        if doc.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {doc.get('version')!r}")
        return cls(
            np.array(doc["gamma_a"], dtype=float),
            np.array(doc["gamma_b"], dtype=float),
            doc["intercept_a"],
            doc["intercept_b"],
            tuple(doc["feature_names"]),
            float(doc.get("clamp", SCORE_CLAMP)),
        )


def predict_params(model: LinearBetaLogistic, x) -> BetaParams:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise DataError("predict_params takes a single feature vector")
    alpha, beta = model.params(x)
    return BetaParams(float(alpha[0]), float(beta[0]))


def predict_survival_curve(model, x, horizon: int) -> np.ndarray:
    """``[P(T > 1 | x), ..., P(T > horizon | x)]``."""
    p = predict_params(model, x) if isinstance(model, LinearBetaLogistic) else model.predict(x)
    return survival_curve([p.alpha], [p.beta], horizon)[0]


def beta_variance(alpha, beta):
    s = np.asarray(alpha) + np.asarray(beta)
    return np.asarray(alpha) * np.asarray(beta) / (s * s * (s + 1.0))


def predict_event_variance(model, x) -> float:
    """Variance of the per-step event probability under the predicted prior."""
    p = predict_params(model, x) if isinstance(model, LinearBetaLogistic) else model.predict(x)
    return float(beta_variance(p.alpha, p.beta))


def to_logistic_equivalent(model: LinearBetaLogistic) -> tuple[np.ndarray, float]:
    """Coefficients ``(gamma_b - gamma_a, intercept_b - intercept_a)``.

    With ``z = coef . x + intercept``, ``P(T = 1 | x) = 1 / (1 + exp(z))``,
    identical to ``alpha / (alpha + beta)`` whenever neither score is clamped.
    """
    return model.gamma_b - model.gamma_a, model.intercept_b - model.intercept_a


class _Objective:
    """Penalized loss of a parameter vector ``[ia, gamma_a, ib, gamma_b]``."""

    def __init__(self, data: SurvivalData, l2: float, clamp: float = SCORE_CLAMP):
        self.X = np.nan_to_num(data.X, nan=0.0)
        self.t, self.c, self.w = data.t, data.censored, data.weight
        self.d = data.n_features
        self.l2 = l2
        self.clamp = clamp
        self.total_weight = float(np.sum(self.w))
        self.order = time_order(self.t)

    def split(self, theta):
        d = self.d
        return theta[0], theta[1:d + 1], theta[d + 1], theta[d + 2:]

    def evaluate(self, theta, rows=None, derivatives=True):
        """Return (loss, grad, hess_diag) summed over ``rows`` (all by default)."""
        ia, ga, ib, gb = self.split(theta)
        X = self.X if rows is None else self.X[rows]
        t = self.t if rows is None else self.t[rows]
        c = self.c if rows is None else self.c[rows]
        w = self.w if rows is None else self.w[rows]
        raw_a = X @ ga + ia
        raw_b = X @ gb + ib
        a = np.clip(raw_a, -self.clamp, self.clamp)
        b = np.clip(raw_b, -self.clamp, self.clamp)
        r = row_terms(np.exp(a), np.exp(b), t, c, derivatives=derivatives,
                      order=self.order if rows is None else None)
        frac = float(np.sum(w)) / self.total_weight
        penalty = 0.5 * self.l2 * frac * (ga @ ga + gb @ gb)
        loss = float(-np.sum(w * r.logp)) + penalty
        if not derivatives:
            return loss, None, None
        # clamped rows have a flat loss in their score
        da = -w * r.ga * (np.abs(raw_a) < self.clamp)
        db = -w * r.gb * (np.abs(raw_b) < self.clamp)
        grad = np.concatenate([[da.sum()], X.T @ da + self.l2 * frac * ga,
                               [db.sum()], X.T @ db + self.l2 * frac * gb])
        X2 = X * X
        ha = -w * r.ha
        hb = -w * r.hb
        hess = np.concatenate([[ha.sum()], X2.T @ ha + self.l2 * frac,
                               [hb.sum()], X2.T @ hb + self.l2 * frac])
        return loss, grad, hess


def _check_training_data(data: SurvivalData):
    if len(data) == 0:
        raise TrainingError("cannot train on an empty dataset")
    if np.all(data.censored):
        raise TrainingError(
            "all rows are censored: the likelihood is unbounded as beta grows, "
            "so at least one observed event is required"
        )


def _initial_theta(d: int, init: Optional[LinearBetaLogistic]) -> np.ndarray:
    if init is None:
        return np.zeros(2 * d + 2)
    return np.concatenate([[init.intercept_a], init.gamma_a, [init.intercept_b], init.gamma_b])


def _full_batch_gd(obj: _Objective, theta: np.ndarray, config: FitConfig, report: TrainingReport):
    W = obj.total_weight
    step = config.learning_rate
    loss, grad, hess = obj.evaluate(theta)
    report.losses.append(loss)
    for epoch in range(1, config.max_epochs + 1):
        gnorm = float(np.linalg.norm(grad)) / W
        report.grad_norm, report.epochs = gnorm, epoch - 1
        if gnorm <= config.gradient_tolerance:
            report.converged = True
            report.message = "gradient tolerance reached"
            return theta
        if config.use_diag_newton:
            direction = -grad / (np.abs(hess) + 1e-3 * W)
        else:
            direction = -grad / W
        slope = float(grad @ direction)
        # Armijo backtracking; the step grows again after each accepted move
        while True:
            candidate = theta + step * direction
            new_loss, _, _ = obj.evaluate(candidate, derivatives=False)
            if new_loss <= loss + 1e-4 * step * slope:
                break
            step *= 0.5
            if step < 1e-16:
                report.message = "line search failed to decrease the loss"
                return theta
        theta = candidate
        loss, grad, hess = obj.evaluate(theta)
        report.losses.append(loss)
        step = min(step * 2.0, 1e6)
    report.grad_norm = float(np.linalg.norm(grad)) / W
    report.epochs = config.max_epochs
    report.converged = report.grad_norm <= config.gradient_tolerance
    report.message = "max_epochs reached"
    return theta


def _lbfgs(obj: _Objective, theta: np.ndarray, config: FitConfig, report: TrainingReport):
    W = obj.total_weight

    def fun(th):
        loss, grad, _ = obj.evaluate(th)
        return loss / W, grad / W

    def callback(intermediate_result):
        report.losses.append(float(intermediate_result.fun) * W)

    report.losses.append(obj.evaluate(theta, derivatives=False)[0])
    res = optimize.minimize(
        fun, theta, jac=True, method="L-BFGS-B", callback=callback,
        options={"maxiter": config.max_epochs, "gtol": config.gradient_tolerance,
                 "ftol": 1e-15, "maxcor": 20},
    )
    _, grad, _ = obj.evaluate(res.x)
    report.grad_norm = float(np.linalg.norm(grad)) / W
    report.epochs = int(res.nit)
    # L-BFGS also stops successfully when the loss stalls at machine precision
    report.converged = bool(res.success) or report.grad_norm <= config.gradient_tolerance
    report.message = str(res.message)
    return res.x


def _minibatch_sgd(obj: _Objective, theta: np.ndarray, config: FitConfig, report: TrainingReport):
    rng = np.random.default_rng(config.seed)
    n = obj.t.shape[0]
    batch = int(config.batch_size)
    report.losses.append(obj.evaluate(theta, derivatives=False)[0])
    for epoch in range(1, config.max_epochs + 1):
        perm = rng.permutation(n)
        for start in range(0, n, batch):
            rows = perm[start:start + batch]
            _, grad, hess = obj.evaluate(theta, rows)
            bw = float(np.sum(obj.w[rows]))
            if config.use_diag_newton:
                theta = theta - config.learning_rate * grad / (np.abs(hess) + 1e-3 * bw)
            else:
                theta = theta - config.learning_rate * grad / bw
        loss, grad, _ = obj.evaluate(theta)
        report.losses.append(loss)
        report.grad_norm = float(np.linalg.norm(grad)) / obj.total_weight
        report.epochs = epoch
        if report.grad_norm <= config.gradient_tolerance:
            report.converged = True
            report.message = "gradient tolerance reached"
            return theta
    report.message = "max_epochs reached"
    return theta


def fit_linear(observations, config: FitConfig = FitConfig(),
               init: Optional[LinearBetaLogistic] = None):
    """Fit a :class:`LinearBetaLogistic` by penalized marginal likelihood.

    Minimizes ``loss + l2/2 * (|gamma_a|^2 + |gamma_b|^2)`` (intercepts are
    not penalized), starting from the uniform prior ``Beta(1, 1)``.

    Returns
    -------
    (model, report)
    """
    data = as_data(observations)
    _check_training_data(data)
    if init is not None and init.n_features != data.n_features:
        raise DataError("init model dimension does not match the data")
    obj = _Objective(data, config.l2_penalty)
    theta = _initial_theta(data.n_features, init)
    report = TrainingReport()
    if config.batch_size != "full":
        theta = _minibatch_sgd(obj, theta, config, report)
    elif config.optimizer == "lbfgs":
        theta = _lbfgs(obj, theta, config, report)
    else:
        theta = _full_batch_gd(obj, theta, config, report)
    if not report.converged:
        logger.warning("fit_linear stopped before convergence: %s (|grad|=%.3g)",
                       report.message, report.grad_norm)
    ia, ga, ib, gb = obj.split(theta)
    model = LinearBetaLogistic(ga.copy(), gb.copy(), ia, ib, tuple(data.feature_names))
    return model, report


def loss_gradient(model: LinearBetaLogistic, observations, l2_penalty: float = 0.0):
    """Penalized loss and its gradient at ``model`` (for diagnostics and tests)."""
    data = as_data(observations)
    obj = _Objective(data, l2_penalty, model.clamp)
    loss, grad, _ = obj.evaluate(_initial_theta(data.n_features, model))
    return loss, grad
