"""Evaluation: horizon AUC, Kaplan-Meier curves, cohort fits and experiments."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import optimize, stats

from .baselines import (GeometricModel, LogisticModel, fit_logistic_at_horizon,
                        laplace_score_posterior, sigmoid_gaussian_variance)
from .beta_math import LOG_PARAM_BOUND, BetaParams
from .data import SurvivalData, as_data, label_at_horizon
from .gbrt import GbrtBetaLogistic
from .linear import FitConfig, LinearBetaLogistic, TrainingError, beta_variance, fit_linear
from .ranking import format_float
from .sbg import row_terms, survival_curve


FLAT_CURVATURE = 1e-9


class AucUndefinedError(ValueError):
    """Only one class is present among the rows labeled at the horizon."""

    def __init__(self, horizon: int, n_pos: int, n_neg: int):
        super().__init__(
            f"AUC undefined at horizon {horizon}: {n_pos} events, {n_neg} non-events"
        )
        self.horizon, self.n_pos, self.n_neg = horizon, n_pos, n_neg


@dataclass(frozen=True)
class HorizonEval:
    horizon: int
    auc: float
    n_effective: int
    n_pos: int = 0
    n_neg: int = 0


def auc_from_labels(scores, y) -> float:
    """Mann-Whitney AUC; tied scores across classes count one half."""
    scores = np.asarray(scores, dtype=float)
    y = np.asarray(y, dtype=bool)
    n_pos = int(y.sum())
    n_neg = y.shape[0] - n_pos
    ranks = stats.rankdata(scores)
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def auc_at_horizon(scores, observations, h: int) -> HorizonEval:
    """AUC of ``scores`` (higher = event sooner) for the event-by-``h`` label.

    Rows censored before ``h`` have no label and are dropped.
    """
    data = as_data(observations)
    scores = np.asarray(scores, dtype=float)
    if scores.shape[0] != len(data):
        raise ValueError(f"{scores.shape[0]} scores for {len(data)} observations")
    keep, y = label_at_horizon(data, h)
    yb = y.astype(bool)
    n_pos = int(yb.sum())
    n_neg = int(yb.shape[0] - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise AucUndefinedError(h, n_pos, n_neg)
    return HorizonEval(int(h), auc_from_labels(scores[keep], yb), int(keep.sum()), n_pos, n_neg)


def empirical_survival(observations) -> list:
    """Kaplan-Meier estimate ``[(t, S(t))]`` for ``t = 1 .. max t``.

    A row censored at ``t`` is known to survive step ``t`` and stays in the
    risk set through it. Weights act as frequency counts.
    """
    data = as_data(observations)
    if len(data) == 0:
        raise ValueError("empirical_survival needs at least one observation")
    max_t = int(data.t.max())
    w = data.weight
    events = np.bincount(data.t[~data.censored], weights=w[~data.censored], minlength=max_t + 1)
    leaving = np.bincount(data.t, weights=w, minlength=max_t + 1)
    # at risk at step t: rows with t_i >= t
    at_risk = np.cumsum(leaving[::-1])[::-1]
    out, s = [], 1.0
    for t in range(1, max_t + 1):
        if at_risk[t] > 0:
            s *= 1.0 - events[t] / at_risk[t]
        out.append((t, float(s)))
    return out


@dataclass(frozen=True)
class CohortFit:
    """Maximum-likelihood prior of a featureless cohort.

    ``identifiable`` is False when the optimum sits on the log-parameter
    bound or the per-row curvature there is essentially zero, which happens
    when the data cannot pin down both parameters.
    """

    params: BetaParams
    a: float
    b: float
    neg_log_likelihood: float
    converged: bool
    identifiable: bool
    iterations: int


def _compress(data: SurvivalData):
    """Collapse rows to unique ``(t, censored)`` cells with summed weights."""
    key = data.t * 2 + data.censored.astype(np.int64)
    uniq, inverse = np.unique(key, return_inverse=True)
    weights = np.bincount(inverse, weights=data.weight)
    return uniq // 2, (uniq % 2).astype(bool), weights


def fit_sbg_cohort(observations, tol: float = 1e-12) -> CohortFit:
    """Two-parameter fit of ``(alpha, beta)`` ignoring any features."""
    data = as_data(observations)
    if len(data) == 0 or np.all(data.censored):
        raise TrainingError("cohort fit needs at least one uncensored row")
    t, cens, w = _compress(data)
    total = float(w.sum())

    def fun(ab):
        r = row_terms(np.full(t.shape, math.exp(ab[0])), np.full(t.shape, math.exp(ab[1])),
                      t, cens)
        loss = -float(w @ r.logp) / total
        return loss, np.array([-(w @ r.ga), -(w @ r.gb)]) / total

    bound = LOG_PARAM_BOUND
    res = optimize.minimize(fun, np.zeros(2), jac=True, method="L-BFGS-B",
                            bounds=[(-bound, bound)] * 2,
                            options={"ftol": 0.0, "gtol": tol, "maxiter": 10_000})
    a, b = (float(v) for v in res.x)
    on_bound = max(abs(a), abs(b)) >= bound - 1e-6
    # a vanishing curvature means the optimum drifted toward infinity along a ridge
    step = 1e-5
    hess = np.column_stack([
        (fun(res.x + step * e)[1] - fun(res.x - step * e)[1]) / (2 * step) for e in np.eye(2)
    ])
    flat = np.linalg.eigvalsh(0.5 * (hess + hess.T))[0] < FLAT_CURVATURE
    return CohortFit(BetaParams.from_log(a, b), a, b, float(res.fun) * total,
                     bool(res.success), not (on_bound or flat), int(res.nit))


def risk_scores(model, X, h: int) -> np.ndarray:
    """Probability of an event by ``h`` under any supported model."""
    X = np.asarray(X, dtype=float)
    if isinstance(model, (LinearBetaLogistic, GbrtBetaLogistic)):
        alpha, beta = model.params(X)
        return 1.0 - survival_curve(alpha, beta, h)[:, -1]
    if isinstance(model, LogisticModel):
        return model.predict_proba(X)
    if isinstance(model, GeometricModel):
        return 1.0 - model.survival(X, h)[:, -1]
    raise TypeError(f"unsupported model type {type(model).__name__}")


def auc_table(models: dict, observations, horizons: Iterable[int]) -> list:
    """``[(horizon, model_name, HorizonEval)]`` for each model and horizon.

    ``models`` maps names to fitted models or to callables ``h -> model``
    (for baselines trained per horizon).
    """
    data = as_data(observations)
    rows = []
    for h in horizons:
        for name, model in models.items():
            m = model(h) if callable(model) and not hasattr(model, "to_dict") else model
            rows.append((int(h), name, auc_at_horizon(risk_scores(m, data.X, h), data, h)))
    return rows


def _writer_target(out, write):
    if out is None:
        buf = io.StringIO()
        write(csv.writer(buf, lineterminator="\n"))
        return buf.getvalue()
    if hasattr(out, "write"):
        write(csv.writer(out, lineterminator="\n"))
        return None
    with open(out, "w", newline="", encoding="utf-8") as fh:
        write(csv.writer(fh, lineterminator="\n"))
    return None


def write_auc_csv(rows: Sequence, out=None):
    """Write ``(horizon, model, auc)`` rows; returns the text when ``out`` is None."""
    def write(w):
        w.writerow(["horizon", "model", "auc"])
        for h, name, ev in rows:
            w.writerow([h, name, format_float(ev.auc)])
    return _writer_target(out, write)


@dataclass(frozen=True)
class PosteriorRow:
    horizon: int
    beta_logistic_var: float
    laplace_diag_var: float
    laplace_full_var: float
    n_test: int

    @property
    def beta_smaller_than_full(self) -> bool:
        return self.beta_logistic_var < self.laplace_full_var


def gaussian_projection(d_in: int, d_out: int, seed: int) -> np.ndarray:
    """Seeded ``(d_in, d_out)`` Gaussian projection scaled by ``1 / sqrt(d_out)``."""
    rng = np.random.default_rng([int(seed), 1])
    return rng.standard_normal((d_in, d_out)) / math.sqrt(d_out)


def posterior_size_experiment(observations, horizons: Sequence[int], d_projected: int,
                              seed: int, train_fraction: float = 0.5,
                              l2_penalty: float = 1e-4) -> list:
    """Mean predictive variance of a beta-logistic vs Laplace-approximated logistic.

    Features are randomly projected to ``d_projected`` dimensions and rows are
    split at random into train and held-out halves. For each horizon both
    models learn the binary label "event by h": the beta-logistic from the
    relabeled one-step data (event at step 1 or censored at step 1), the
    logistic directly. On held-out rows with a determinable label, the report
    averages the beta prior variance and the Laplace variances of the
    logistic prediction under diagonal and full Hessians.
    """
    data = as_data(observations)
    if data.n_features == 0:
        raise ValueError("posterior_size_experiment needs features")
    if not 1 <= d_projected <= 200:
        raise ValueError("d_projected must lie in [1, 200] for the full-Hessian variance")
    G = gaussian_projection(data.n_features, d_projected, seed)
    Xp = np.nan_to_num(data.X, nan=0.0) @ G
    names = [f"proj_{j}" for j in range(d_projected)]
    projected = SurvivalData(data.t, data.censored, Xp, data.weight, names)
    perm = np.random.default_rng([int(seed), 2]).permutation(len(data))
    n_train = int(round(train_fraction * len(data)))
    train, test = projected.subset(np.sort(perm[:n_train])), projected.subset(np.sort(perm[n_train:]))

    rows = []
    for h in horizons:
        keep, y = label_at_horizon(train, h)
        one_step = SurvivalData(np.ones(int(keep.sum()), dtype=np.int64), y == 0,
                                train.X[keep], train.weight[keep], names)
        beta_model, _ = fit_linear(one_step, FitConfig(l2_penalty=l2_penalty))
        logit = fit_logistic_at_horizon(train, h)
        test_keep, _ = label_at_horizon(test, h)
        Xt = test.X[test_keep]
        alpha, beta = beta_model.params(Xt)
        v_beta = beta_variance(alpha, beta)
        variances = []
        for mode in ("diagonal", "full"):
            mu, s2 = laplace_score_posterior(logit, Xt, mode)
            variances.append(np.clip(sigmoid_gaussian_variance(mu, s2), 0.0, 0.25))
        rows.append(PosteriorRow(int(h), float(np.mean(v_beta)), float(np.mean(variances[0])),
                                 float(np.mean(variances[1])), int(test_keep.sum())))
    return rows


def write_posterior_csv(rows: Sequence[PosteriorRow], out=None):
    """Write ``(horizon, beta_logistic_var, laplace_diag_var, laplace_full_var)``."""
    def write(w):
        w.writerow(["horizon", "beta_logistic_var", "laplace_diag_var", "laplace_full_var"])
        for r in rows:
            w.writerow([r.horizon, format_float(r.beta_logistic_var),
                        format_float(r.laplace_diag_var), format_float(r.laplace_full_var)])
    return _writer_target(out, write)
