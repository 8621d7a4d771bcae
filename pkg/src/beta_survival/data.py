"""Survival observations and the array container the models train on."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np


class DataError(ValueError):
    """Invalid survival data (bad times, censoring flags, shapes)."""


@dataclass(frozen=True)
class Observation:
    """One unit: discrete time ``t``, censoring flag, features and weight.

    ``censored=True`` means the event had not been observed by ``t``.
    """

    t: int
    censored: bool
    features: tuple = ()
    weight: float = 1.0

    def __post_init__(self):
        if int(self.t) != self.t or self.t < 1:
            raise DataError(
                f"t must be a positive integer, got {self.t!r}; "
                "if times start at zero, shift them by one time unit"
            )
        if not self.weight > 0:
            raise DataError(f"weight must be positive, got {self.weight!r}")
        object.__setattr__(self, "t", int(self.t))
        object.__setattr__(self, "censored", bool(self.censored))
        object.__setattr__(self, "features", tuple(float(v) for v in self.features))


@dataclass
class SurvivalData:
    """Columnar survival dataset.

    Attributes
    ----------
    t : (n,) int array of event or censoring times, all >= 1.
    censored : (n,) bool array.
    X : (n, d) float array of features (may contain NaN for missing cells).
    weight : (n,) positive float array.
    feature_names : names of the ``d`` feature columns.
    """

    t: np.ndarray
    censored: np.ndarray
    X: np.ndarray
    weight: np.ndarray = None
    feature_names: list = field(default_factory=list)

    def __post_init__(self):
        t = np.asarray(self.t)
        if t.ndim != 1:
            raise DataError("t must be one-dimensional")
        n = t.shape[0]
        if n and (not np.all(np.isfinite(t)) or np.any(t != np.round(t))):
            raise DataError("t must contain integers")
        t = t.astype(np.int64)
        bad = np.flatnonzero(t < 1)
        if bad.size:
            raise DataError(
                f"t must be >= 1; rows {bad[:10].tolist()} violate this. "
                "Shift zero-based times by one time unit."
            )
        censored = np.asarray(self.censored)
        if censored.shape != (n,):
            raise DataError("censored must have the same length as t")
        if censored.dtype != bool:
            if n and not np.all(np.isin(censored, (0, 1))):
                raise DataError("censored must contain only 0/1")
            censored = censored.astype(bool)
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1 and n == 0:
            X = X.reshape(0, 0 if not self.feature_names else len(self.feature_names))
        if X.ndim != 2 or X.shape[0] != n:
            raise DataError(f"X must have shape (n, d) with n={n}, got {X.shape}")
        if self.weight is None:
            weight = np.ones(n)
        else:
            weight = np.asarray(self.weight, dtype=float)
            if weight.shape != (n,) or (n and not np.all(weight > 0)):
                raise DataError("weight must be positive with one entry per row")
        names = list(self.feature_names) or [f"x{j}" for j in range(X.shape[1])]
        if len(names) != X.shape[1]:
            raise DataError(
                f"{len(names)} feature names given for {X.shape[1]} feature columns"
            )
        self.t, self.censored, self.X, self.weight = t, censored, X, weight
        self.feature_names = names

    def __len__(self):
        return self.t.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def subset(self, index) -> "SurvivalData":
        return SurvivalData(
            self.t[index], self.censored[index], self.X[index], self.weight[index],
            list(self.feature_names),
        )

    def observations(self) -> list:
        return [
            Observation(int(t), bool(c), tuple(x), float(w))
            for t, c, x, w in zip(self.t, self.censored, self.X, self.weight)
        ]

    @classmethod
    def from_observations(
        cls, observations: Sequence[Observation], feature_names: Iterable[str] = ()
    ) -> "SurvivalData":
        obs = list(observations)
        dims = {len(o.features) for o in obs}
        if len(dims) > 1:
            raise DataError(f"observations have differing feature dimensions {sorted(dims)}")
        d = dims.pop() if dims else len(list(feature_names))
        return cls(
            t=np.array([o.t for o in obs], dtype=np.int64),
            censored=np.array([o.censored for o in obs], dtype=bool),
            X=np.array([o.features for o in obs], dtype=float).reshape(len(obs), d),
            weight=np.array([o.weight for o in obs], dtype=float),
            feature_names=list(feature_names),
        )

    def with_censor_weight(self, factor: float) -> "SurvivalData":
        """Weight censored rows by ``factor`` to undo censored down-sampling."""
        if not factor > 0:
            raise DataError("down-sampling factor must be positive")
        w = self.weight.copy()
        w[self.censored] *= factor
        return SurvivalData(self.t, self.censored, self.X, w, list(self.feature_names))

    def censor_at(self, horizon: int) -> "SurvivalData":
        """Administratively censor every row at ``horizon``."""
        late = self.t > horizon
        t = np.where(late, horizon, self.t)
        return SurvivalData(t, self.censored | late, self.X, self.weight, list(self.feature_names))


def as_data(observations) -> SurvivalData:
    if isinstance(observations, SurvivalData):
        return observations
    return SurvivalData.from_observations(observations)


def label_at_horizon(data: SurvivalData, horizon: int) -> tuple[np.ndarray, np.ndarray]:
    """Binary "event by ``horizon``" labels.

    Returns ``(keep, y)``: ``keep`` masks rows whose label is determinable
    (censored rows with ``t < horizon`` are dropped; a row censored exactly
    at ``horizon`` is known to have ``T > horizon`` and is labeled 0), and
    ``y`` holds labels for kept rows.
    """
    if horizon < 1:
        raise DataError(f"horizon must be >= 1, got {horizon}")
    keep = ~(data.censored & (data.t < horizon))
    y = (~data.censored[keep]) & (data.t[keep] <= horizon)
    return keep, y.astype(float)
