"""Transitive ranking of beta distributions by their medians.

Pairwise probabilities ``P(theta_v > theta_u)`` between beta variables do
not in general compose transitively across many items, but they agree in
sign with the ordering of the medians, which is a scalar key. Rankings
therefore sort by medians; the pairwise sum for integer parameters is kept
as a verification oracle.

For horizons beyond one step, each item's prior is pushed through the
power map ``z = (1 - phi) * phi**(t - 1)`` and the result is approximated by
a beta distribution with matching first two moments.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from .beta_math import BetaDomainError, BetaParams, beta_median, log_beta_fn

MEDIAN_TIE_TOL = 1e-12
PAIRWISE_MAX_PARAM = 60


class ProjectionError(ArithmeticError):
    """The moment-matched beta approximation is not valid for these inputs."""


class Ordering(enum.Enum):
    U_FIRST = "u_first"
    V_FIRST = "v_first"
    TIE = "tie"


@dataclass(frozen=True)
class RankedItem:
    """One row of a ranking.

    ``params`` are the parameters the ranking key was computed from (the
    raw prior at horizon 1, the projected event-at-horizon distribution
    otherwise) and ``median_score`` is their median. ``projection_failed``
    marks items placed by their raw-prior fallback key.
    """

    item_id: str
    params: BetaParams
    median_score: float
    horizon: int
    rank: int = 0
    projection_failed: bool = False


@dataclass(frozen=True)
class PowerBetaMoments:
    """First two moments ``m1 = E[z]`` and ``m2 = E[z**2]``.

    ``log_ratio`` is ``log(m2 / m1**2)`` and ``log_m2_over_m1`` is
    ``log(m2 / m1)``; both are carried separately because forming them from
    ``log_m1`` and ``log_m2`` loses precision for concentrated priors.
    """

    m1: float
    m2: float
    log_m1: float
    log_m2: float
    log_ratio: float
    log_m2_over_m1: float


def _as_int(value: float, name: str) -> int:
    if value != math.floor(value):
        raise BetaDomainError(
            f"{name}={value} is not an integer; compare real-valued parameters by median"
        )
    k = int(value)
    if not 1 <= k <= PAIRWISE_MAX_PARAM:
        raise BetaDomainError(f"{name}={k} must lie in [1, {PAIRWISE_MAX_PARAM}]")
    return k


def pairwise_prob_integer(u: BetaParams, v: BetaParams) -> float:
    """``P(theta_v > theta_u)`` for integer-valued parameters as a finite sum.

    Each term ``B(au + i, bu + bv) / ((bv + i) B(1 + i, bv) B(au, bu))`` is
    formed in log space; the sum runs over ``i = 0 .. alpha_v - 1``.
    """
    au, bu = _as_int(u.alpha, "u.alpha"), _as_int(u.beta, "u.beta")
    av, bv = _as_int(v.alpha, "v.alpha"), _as_int(v.beta, "v.beta")
    base = log_beta_fn(au, bu)
    logs = [
        log_beta_fn(au + i, bu + bv) - math.log(bv + i) - log_beta_fn(1 + i, bv) - base
        for i in range(av)
    ]
    return float(np.exp(np.logaddexp.reduce(logs)))


def compare_by_median(u: BetaParams, v: BetaParams) -> Ordering:
    """Order two priors by median, larger median first.

    ``U_FIRST`` means ``u`` has the larger median, equivalently
    ``P(theta_u > theta_v) > 1/2``. Medians closer than ``1e-12`` tie.
    """
    mu, mv = beta_median(u), beta_median(v)
    if abs(mu - mv) < MEDIAN_TIE_TOL:
        return Ordering.TIE
    return Ordering.U_FIRST if mu > mv else Ordering.V_FIRST


def power_beta_moments(params: BetaParams, t: int, mode: str = "exact") -> PowerBetaMoments:
    """Moments of ``z = (1 - phi) * phi**(t - 1)`` for ``phi ~ Beta(alpha, beta)``.

    ``mode="exact"`` integrates against the beta density, which for integer
    ``t`` gives ratios of rising factorials. ``mode="paper_closed_form"``
    evaluates the product expressions
    ``m1 = (b/s) (a/s)**(t-1)`` and
    ``m2 = (a(a+1)/(s(s+1))) (b(b+1)/(s(s+1)))**(t-1)`` with ``s = a + b``,
    kept for comparison against the exact moments.
    """
    if t < 1:
        raise BetaDomainError(f"t must be >= 1, got {t}")
    a, b = params.alpha, params.beta
    s = a + b
    if mode == "exact":
        # rising factorials: m1 = a^(t-1) b / s^(t), m2 = a^(2t-2) b (b+1) / s^(2t)
        la = np.log(a + np.arange(2 * t - 2))
        ls = np.log(s + np.arange(2 * t))
        lb, lb1 = math.log(b), math.log(b + 1)
        m1_terms = [*la[:t - 1], lb, *(-ls[:t])]
        m2_terms = [*la, lb, lb1, *(-ls)]
        log_m1 = math.fsum(m1_terms)
        log_m2 = math.fsum(m2_terms)
        log_ratio = math.fsum(m2_terms + [-2.0 * v for v in m1_terms])
        log_m2_over_m1 = math.fsum(m2_terms + [-v for v in m1_terms])
    elif mode == "paper_closed_form":
        log_m1 = math.log(b / s) + (t - 1) * math.log(a / s)
        log_m2 = (math.log(a * (a + 1) / (s * (s + 1)))
                  + (t - 1) * math.log(b * (b + 1) / (s * (s + 1))))
        log_ratio = log_m2 - 2.0 * log_m1
        log_m2_over_m1 = log_m2 - log_m1
    else:
        raise ValueError(f"unknown projection mode {mode!r}")
    return PowerBetaMoments(math.exp(log_m1), math.exp(log_m2), log_m1, log_m2,
                            log_ratio, log_m2_over_m1)


def beta_from_moments(moments: PowerBetaMoments) -> BetaParams:
    """Method-of-moments beta fit, ``alpha = (S - T) S / (T - S**2)`` and
    ``beta = (S - T)(1 - S) / (T - S**2)`` with ``S = m1``, ``T = m2``.

    Evaluated through ``expm1`` of log-moment differences, which avoids the
    cancellation in ``T - S**2`` for concentrated priors.
    """
    # T - S^2 = S^2 * r and S - T = S * q
    r = math.expm1(moments.log_ratio)
    q = -math.expm1(moments.log_m2_over_m1)
    if not r > 0:
        raise ProjectionError(
            f"degenerate moments (m2 - m1^2 = {moments.m1 ** 2 * r:.3g}); "
            "the beta approximation is invalid at this horizon"
        )
    if not q > 0 or moments.log_m1 >= 0:
        raise ProjectionError("moments outside the unit interval; beta approximation invalid")
    alpha_hat = q / r
    beta_hat = alpha_hat * -math.expm1(moments.log_m1) / moments.m1
    if not (math.isfinite(alpha_hat) and math.isfinite(beta_hat)) or alpha_hat <= 0 or beta_hat <= 0:
        raise ProjectionError("method-of-moments parameters are not positive and finite")
    try:
        return BetaParams(alpha_hat, beta_hat)
    except BetaDomainError as exc:
        raise ProjectionError(str(exc)) from exc


def project_power_beta(params: BetaParams, t: int, mode: str = "exact") -> BetaParams:
    """Beta approximation of ``z = (1 - phi) * phi**(t - 1)``, ``phi ~ Beta(params)``.

    At ``t = 1`` the exact mode returns the mirrored parameters since
    ``1 - phi ~ Beta(beta, alpha)``.
    """
    return beta_from_moments(power_beta_moments(params, t, mode))


def event_at_horizon_params(params: BetaParams, t: int, mode: str = "exact") -> BetaParams:
    """Beta approximation of ``theta * (1 - theta)**(t - 1)``, ``theta ~ Beta(params)``.

    This is the conditional probability of the event landing exactly on
    step ``t``. It is the power map applied to the survival probability
    ``1 - theta``, whose prior is the mirrored one.
    """
    if t == 1:
        return params
    return project_power_beta(params.mirror(), t, mode)


def rank_at_horizon(items: Sequence, t: int, mode: str = "exact") -> list:
    """Rank ``(item_id, BetaParams)`` pairs, most at risk first.

    At ``t = 1`` the key is the median of the event probability. For
    ``t > 1`` it is the median of the projected distribution of the
    probability of the event occurring exactly at step ``t``. Ties (medians
    within ``1e-12``) go to the lower alpha, then to input order. Items whose
    projection fails keep their raw prior and are placed by its median.
    """
    if t < 1:
        raise BetaDomainError(f"t must be >= 1, got {t}")
    items = list(items)
    if not items:
        raise ValueError("cannot rank an empty list")
    keyed = []
    for index, (item_id, params) in enumerate(items):
        failed = False
        try:
            shown = event_at_horizon_params(params, t, mode)
        except ProjectionError:
            shown, failed = params, True
        median = beta_median(shown)
        keyed.append((median, shown.alpha, index, str(item_id), shown, failed))

    # group medians that tie within tolerance, then order inside each group
    by_median = sorted(keyed, key=lambda k: (-k[0], k[2]))
    groups, current = [], [by_median[0]]
    for entry in by_median[1:]:
        if abs(current[0][0] - entry[0]) < MEDIAN_TIE_TOL:
            current.append(entry)
        else:
            groups.append(current)
            current = [entry]
    groups.append(current)

    ranked = []
    for group in groups:
        for median, _, _, item_id, shown, failed in sorted(group, key=lambda k: (k[1], k[2])):
            ranked.append(RankedItem(item_id, shown, median, t, len(ranked) + 1, failed))
    return ranked


def format_float(x: float) -> str:
    """Shortest round-trip decimal representation."""
    return repr(float(x))


RANK_COLUMNS = ("item_id", "horizon", "alpha_hat", "beta_hat", "median", "rank")


def write_rank_csv(ranked: Iterable[RankedItem], out) -> None:
    """Write a ranking as CSV to a path or text stream."""
    if isinstance(out, (str, bytes)) or hasattr(out, "__fspath__"):
        with open(out, "w", newline="", encoding="utf-8") as fh:
            write_rank_csv(ranked, fh)
        return
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(RANK_COLUMNS)
    for item in ranked:
        writer.writerow([item.item_id, item.horizon, format_float(item.params.alpha),
                         format_float(item.params.beta), format_float(item.median_score),
                         item.rank])


def rank_csv_text(ranked: Iterable[RankedItem]) -> str:
    buf = io.StringIO()
    write_rank_csv(ranked, buf)
    return buf.getvalue()


@dataclass(frozen=True)
class ProjectionComparison:
    alpha: float
    beta: float
    t: int
    mode: str
    m1: float
    m2: float
    mc_m1: float
    mc_m2: float
    mc_m1_se: float
    mc_m2_se: float
    failed: bool

    @property
    def z_scores(self) -> tuple[float, float]:
        return ((self.m1 - self.mc_m1) / self.mc_m1_se, (self.m2 - self.mc_m2) / self.mc_m2_se)


def projection_mode_report(cases: Iterable, n_draws: int = 1_000_000, seed: int = 0,
                           modes=("exact", "paper_closed_form")) -> list:
    """Compare the moments of each projection mode with a Monte Carlo oracle.

    ``cases`` yields ``(BetaParams, t)``. Draws for case ``k`` come from the
    seed sequence ``(seed, k)``.
    """
    rows = []
    for k, (params, t) in enumerate(cases):
        rng = np.random.default_rng([seed, k])
        phi = rng.beta(params.alpha, params.beta, size=n_draws)
        z = (1.0 - phi) * phi ** (t - 1)
        z2 = z * z
        mc = (float(z.mean()), float(z2.mean()),
              float(z.std(ddof=1) / math.sqrt(n_draws)), float(z2.std(ddof=1) / math.sqrt(n_draws)))
        for mode in modes:
            m = power_beta_moments(params, t, mode)
            try:
                beta_from_moments(m)
                failed = False
            except ProjectionError:
                failed = True
            rows.append(ProjectionComparison(params.alpha, params.beta, t, mode, m.m1, m.m2,
                                             *mc, failed))
    return rows


def implied_mean_variance(params: BetaParams) -> tuple[float, float]:
    return params.mean(), params.variance()


def ranking_changes(items: Sequence, horizons: Iterable[int]) -> Optional[tuple]:
    """First pair of horizons whose rankings differ, with both id orders."""
    previous = None
    for t in horizons:
        order = [r.item_id for r in rank_at_horizon(items, t)]
        if previous is not None and order != previous[1]:
            return previous[0], t, previous[1], order
        previous = (t, order)
    return None
