"""Special functions for beta distributions.

Log-beta, the regularized incomplete beta function, its inverse at 0.5
(the median) and seeded beta sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

# matches the +-30 clamp applied to linear scores by the models
LOG_PARAM_BOUND = 30.0
PARAM_MIN = math.exp(-LOG_PARAM_BOUND)
PARAM_MAX = math.exp(LOG_PARAM_BOUND)

_CF_EPS = 1e-16
_CF_TINY = 1e-300
_CF_MAX_ITER = 10_000


class BetaDomainError(ValueError):
    """Raised when an argument lies outside a function's domain."""


def _check_positive(name: str, value: float) -> float:
    value = float(value)
    if not math.isfinite(value) or value <= 0:
        raise BetaDomainError(f"{name} must be positive and finite, got {value!r}")
    return value


@dataclass(frozen=True)
class BetaParams:
    """Shape parameters of a Beta(alpha, beta) distribution."""

    alpha: float
    beta: float

    def __post_init__(self):
        for name in ("alpha", "beta"):
            value = _check_positive(name, getattr(self, name))
            if not PARAM_MIN <= value <= PARAM_MAX:
                raise BetaDomainError(
                    f"{name}={value!r} is outside the supported range "
                    f"[exp(-{LOG_PARAM_BOUND:g}), exp({LOG_PARAM_BOUND:g})]"
                )
            object.__setattr__(self, name, value)

    @classmethod
    def from_log(cls, a: float, b: float) -> "BetaParams":
        return cls(math.exp(a), math.exp(b))

    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)

    def variance(self) -> float:
        s = self.alpha + self.beta
        return self.alpha * self.beta / (s * s * (s + 1.0))

    def mirror(self) -> "BetaParams":
        """Parameters of 1 - theta."""
        return BetaParams(self.beta, self.alpha)


def log_beta_fn(alpha: float, beta: float) -> float:
    """Return ``ln B(alpha, beta)``.

    Backed by :func:`scipy.special.betaln`, which avoids the cancellation
    of ``lgamma(a) + lgamma(b) - lgamma(a + b)`` for very unequal arguments.
    """
    alpha = _check_positive("alpha", alpha)
    beta = _check_positive("beta", beta)
    return float(special.betaln(alpha, beta))


def _betacf(a: float, b: float, x: float) -> float:
    # Modified Lentz evaluation of the continued fraction for I_x(a, b).
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError(
        f"incomplete beta continued fraction did not converge for a={a}, b={b}, x={x}"
    )


def _log_front(a: float, b: float, x: float) -> float:
    return a * math.log(x) + b * math.log1p(-x) - log_beta_fn(a, b)


def _switch_point(a: float, b: float) -> float:
    return (a + 1.0) / (a + b + 2.0)


def reg_inc_beta(x: float, params: BetaParams) -> float:
    """Regularized incomplete beta function ``I_x(alpha, beta)``.

    Continued fraction with the symmetry switch
    ``I_x(a, b) = 1 - I_{1-x}(b, a)`` applied above ``(a + 1) / (a + b + 2)``,
    past which the fraction for ``(a, b, x)`` converges slowly.
    """
    x = float(x)
    if not 0.0 <= x <= 1.0 or math.isnan(x):
        raise BetaDomainError(f"x must lie in [0, 1], got {x!r}")
    a, b = params.alpha, params.beta
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    if x <= _switch_point(a, b):
        return math.exp(_log_front(a, b, x)) * _betacf(a, b, x) / a
    tail = math.exp(_log_front(a, b, x)) * _betacf(b, a, 1.0 - x) / b
    return 1.0 - tail


def _upper_tail(x: float, params: BetaParams) -> float:
    # 1 - I_x(a, b), computed without cancellation on the upper side.
    a, b = params.alpha, params.beta
    if x > _switch_point(a, b):
        return math.exp(_log_front(a, b, x)) * _betacf(b, a, 1.0 - x) / b
    return 1.0 - reg_inc_beta(x, params)


def _expit(y: float) -> float:
    if y >= 0:
        return 1.0 / (1.0 + math.exp(-y))
    e = math.exp(y)
    return e / (1.0 + e)


def beta_quantile(p: float, params: BetaParams, tol: float = 1e-12, max_iter: int = 200) -> float:
    """Inverse of :func:`reg_inc_beta` in ``x``.

    Safeguarded Newton iteration in logit space: each step is a Newton step
    on ``I(expit(y)) - p`` unless it leaves the current bracket, in which case
    the bracket is bisected. Working on the logit scale keeps the iteration
    well conditioned for medians very close to 0 or 1 (small shapes).
    """
    if not 0.0 < p < 1.0:
        raise BetaDomainError(f"p must lie in (0, 1), got {p!r}")
    a, b = params.alpha, params.beta
    lo, hi = -745.0, 745.0
    # start from the normal-approximation guess on the logit scale
    m = a / (a + b)
    y = math.log(m) - math.log1p(-m)
    y = min(max(y, lo), hi)
    for _ in range(max_iter):
        x = _expit(y)
        if x <= 0.0:
            lo = y
            y = 0.5 * (lo + hi)
            continue
        if x >= 1.0:
            hi = y
            y = 0.5 * (lo + hi)
            continue
        f = _quantile_residual(x, p, params)
        if f == 0.0:
            return x
        if f < 0:
            lo = y
        else:
            hi = y
        # dI/dy = pdf(x) * x * (1 - x)
        slope = math.exp(a * math.log(x) + b * math.log1p(-x) - log_beta_fn(a, b))
        y_new = y - f / slope if slope > 0 else 0.5 * (lo + hi)
        if not lo < y_new < hi:
            y_new = 0.5 * (lo + hi)
        if abs(y_new - y) < tol or hi - lo < tol:
            y = y_new
            break
        y = y_new
    return _polish(_expit(y), p, params)


def _quantile_residual(x: float, p: float, params: BetaParams) -> float:
    if p <= 0.5:
        return reg_inc_beta(x, params) - p
    return (1.0 - p) - _upper_tail(x, params)


def _polish(x: float, p: float, params: BetaParams, max_steps: int = 64) -> float:
    """Move ``x`` by single ulps to the float where the CDF crosses ``p``.

    The logit-scale iteration can land a few ulps off because ``expit``
    rounds; near 0 or 1 a single ulp can shift the CDF by more than 1e-9.
    """
    if not 0.0 < x < 1.0:
        return x
    for _ in range(max_steps):
        down = float(np.nextafter(x, 0.0))
        if down > 0.0 and _quantile_residual(down, p, params) >= 0.0:
            x = down
            continue
        if _quantile_residual(x, p, params) < 0.0:
            up = float(np.nextafter(x, 1.0))
            if up < 1.0:
                x = up
                continue
        break
    return x


def beta_median(params: BetaParams) -> float:
    """Median of Beta(alpha, beta), i.e. the inverse incomplete beta at 0.5."""
    return beta_quantile(0.5, params)


def sample_beta(params: BetaParams, rng_seed: int, n: int) -> np.ndarray:
    """Draw ``n`` iid Beta(alpha, beta) variates, reproducibly for a seed."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(rng_seed)
    return rng.beta(params.alpha, params.beta, size=n)
