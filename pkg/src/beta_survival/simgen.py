"""Synthetic beta-geometric survival data.

Every generator draws units in fixed-size blocks, each block from its own
counter-based Philox stream keyed by ``(seed, stream)`` and jumped by the
block index, so a dataset does not depend on how generation is chunked or
parallelized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .beta_math import BetaParams
from .data import SurvivalData

BLOCK_SIZE = 1 << 16


@dataclass(frozen=True)
class CohortSpec:
    name: str
    params: BetaParams
    n: int = 1

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("n must be nonnegative")


# three shapes sharing the mean 0.25; the u-shaped alpha is 1/12 exactly
TABLE1_COHORTS = (
    CohortSpec("normal", BetaParams(4.75, 14.25)),
    CohortSpec("right_skewed", BetaParams(0.5, 1.5)),
    CohortSpec("u_shaped", BetaParams(1.0 / 12.0, 0.25)),
)


def _block_rng(seed: int, stream: int, block: int) -> np.random.Generator:
    bitgen = np.random.Philox(np.random.SeedSequence([int(seed), int(stream)]))
    return np.random.Generator(bitgen.jumped(block))


def _blocks(n: int):
    for k, start in enumerate(range(0, n, BLOCK_SIZE)):
        yield k, start, min(start + BLOCK_SIZE, n)


def geometric_times(theta: np.ndarray, uniforms: np.ndarray) -> np.ndarray:
    """Shifted-geometric times by inversion, ``inf`` where ``theta == 0``.

    ``uniforms`` must lie in ``(0, 1]``.
    """
    theta = np.asarray(theta, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = 1.0 + np.floor(np.log(uniforms) / np.log1p(-theta))
    t = np.where(theta >= 1.0, 1.0, t)
    return np.where(theta <= 0.0, np.inf, t)


def _censor(t: np.ndarray, horizon: int) -> tuple[np.ndarray, np.ndarray]:
    censored = t > horizon
    return np.where(censored, horizon, t).astype(np.int64), censored


def gen_beta_geometric(params: BetaParams, n: int, censor_horizon: int, seed: int,
                       stream: int = 0) -> SurvivalData:
    """Draw a coin ``theta ~ Beta`` per unit and flip it until the first event.

    Units still without an event after ``censor_horizon`` flips are emitted
    as censored at ``censor_horizon``.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if censor_horizon < 1:
        raise ValueError("censor_horizon must be >= 1")
    t = np.empty(n)
    for k, lo, hi in _blocks(n):
        rng = _block_rng(seed, stream, k)
        theta = rng.beta(params.alpha, params.beta, size=hi - lo)
        t[lo:hi] = geometric_times(theta, 1.0 - rng.random(hi - lo))
    t, censored = _censor(t, censor_horizon)
    return SurvivalData(t, censored, np.zeros((n, 0)), feature_names=[])


def _one_hot(groups: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros((groups.shape[0], k))
    out[np.arange(groups.shape[0]), groups] = 1.0
    return out


def group_feature_names(cohorts=TABLE1_COHORTS) -> list:
    return [f"group_{c.name}" for c in cohorts]


def gen_table1_mixture(n_per_cohort: int, censor_horizon: int = 4, seed: int = 0,
                       cohorts=TABLE1_COHORTS) -> SurvivalData:
    """Concatenated cohorts with one-hot group features (``group_<name>``)."""
    parts = [
        gen_beta_geometric(c.params, n_per_cohort, censor_horizon, seed, stream=i + 1)
        for i, c in enumerate(cohorts)
    ]
    groups = np.repeat(np.arange(len(cohorts)), n_per_cohort)
    return SurvivalData(
        np.concatenate([p.t for p in parts]),
        np.concatenate([p.censored for p in parts]),
        _one_hot(groups, len(cohorts)),
        feature_names=group_feature_names(cohorts),
    )


def sweep_unit_params(n: int, homogeneity_level: float, noise_scale: float, seed: int,
                      cohorts=TABLE1_COHORTS):
    """Per-unit covariates and priors of the heterogeneity sweep.

    Each unit picks a cohort uniformly and a covariate ``u ~ U(0, 1)``; its
    prior is ``alpha = alpha0 * (1 + level * u) + Exp(noise)`` and
    ``beta = beta0 * (1 + level * u) + Exp(noise)``, so the noiseless prior
    mean stays at the cohort mean while ``alpha + beta`` (homogeneity) grows
    linearly with ``u``.

    Returns ``(groups, u, alpha, beta, theta_uniforms, time_uniforms)``.
    """
    if homogeneity_level < 0:
        raise ValueError("homogeneity_level must be nonnegative")
    if not noise_scale > 0:
        raise ValueError("noise_scale must be positive")
    a0 = np.array([c.params.alpha for c in cohorts])
    b0 = np.array([c.params.beta for c in cohorts])
    groups = np.empty(n, dtype=np.int64)
    u = np.empty(n)
    alpha = np.empty(n)
    beta = np.empty(n)
    theta = np.empty(n)
    times = np.empty(n)
    for k, lo, hi in _blocks(n):
        rng = _block_rng(seed, 100, k)
        m = hi - lo
        g = rng.integers(0, len(cohorts), size=m)
        uu = rng.random(m)
        scale = 1.0 + homogeneity_level * uu
        al = a0[g] * scale + rng.exponential(noise_scale, size=m)
        be = b0[g] * scale + rng.exponential(noise_scale, size=m)
        groups[lo:hi], u[lo:hi], alpha[lo:hi], beta[lo:hi] = g, uu, al, be
        theta[lo:hi] = rng.beta(al, be)
        times[lo:hi] = geometric_times(theta[lo:hi], 1.0 - rng.random(m))
    return groups, u, alpha, beta, theta, times


def gen_heterogeneity_sweep(n: int, homogeneity_level: float, noise_scale: float = 0.05,
                            censor_horizon: int = 4, seed: int = 0,
                            cohorts=TABLE1_COHORTS) -> SurvivalData:
    """The three mixture cohorts with a homogeneity covariate ``u`` and exponential noise.

    Features are the cohort one-hot columns followed by ``u``.
    """
    if censor_horizon < 1:
        raise ValueError("censor_horizon must be >= 1")
    groups, u, _, _, _, times = sweep_unit_params(n, homogeneity_level, noise_scale, seed, cohorts)
    t, censored = _censor(times, censor_horizon)
    X = np.column_stack([_one_hot(groups, len(cohorts)), u])
    return SurvivalData(t, censored, X, feature_names=group_feature_names(cohorts) + ["u"])


def gen_skewed_covariate(n: int, d: int = 20, base: BetaParams = BetaParams(0.2, 2.0),
                         coef_scale: float = 0.5, censor_horizon: int = 10,
                         seed: int = 0) -> SurvivalData:
    """Heavily skewed priors modulated by Gaussian covariates.

    ``x ~ N(0, I_d)`` and ``log alpha = log alpha0 + x . w_a``,
    ``log beta = log beta0 + x . w_b`` with ``w ~ N(0, coef_scale**2 / d)``
    drawn once from stream 200. Features are ``x_0 .. x_{d-1}``.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    if censor_horizon < 1:
        raise ValueError("censor_horizon must be >= 1")
    coef_rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), 200])))
    w = coef_rng.normal(0.0, coef_scale / np.sqrt(d), size=(d, 2))
    X = np.empty((n, d))
    t = np.empty(n)
    for k, lo, hi in _blocks(n):
        rng = _block_rng(seed, 201, k)
        m = hi - lo
        x = rng.standard_normal((m, d))
        alpha = base.alpha * np.exp(x @ w[:, 0])
        beta = base.beta * np.exp(x @ w[:, 1])
        X[lo:hi] = x
        t[lo:hi] = geometric_times(rng.beta(alpha, beta), 1.0 - rng.random(m))
    t, censored = _censor(t, censor_horizon)
    return SurvivalData(t, censored, X, feature_names=[f"x_{j}" for j in range(d)])
