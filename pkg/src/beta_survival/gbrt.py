"""Vector-output gradient-boosted trees for the beta-logistic loss.

Each boosting round grows one regression tree whose leaves hold a pair of
deltas ``(delta_a, delta_b)`` for the log-parameters ``a = log(alpha)`` and
``b = log(beta)``. Splits are chosen by squared-error reduction on the two
gradient columns with equal weight; leaf values are per-dimension Newton
steps using the diagonal Hessian of the loss.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .beta_math import BetaParams
from .data import DataError, SurvivalData, as_data
from .linear import SCORE_CLAMP, FitConfig, TrainingError, fit_linear
from .sbg import row_terms, time_order

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


def custom_objective(preds, t, censored, weight=None):
    """Gradient and diagonal Hessian of the loss in ``(a, b)``.

    Shaped like a boosting-library custom objective: ``preds`` is ``(n, 2)``
    raw scores ``(a, b)``; returns ``(grad, hess)``, both ``(n, 2)``, of the
    negative log-likelihood.
    """
    preds = np.asarray(preds, dtype=float)
    a = np.clip(preds[:, 0], -SCORE_CLAMP, SCORE_CLAMP)
    b = np.clip(preds[:, 1], -SCORE_CLAMP, SCORE_CLAMP)
    r = row_terms(np.exp(a), np.exp(b), t, censored)
    w = np.ones(a.shape[0]) if weight is None else np.asarray(weight, dtype=float)
    grad = np.column_stack([-w * r.ga, -w * r.gb])
    hess = np.column_stack([-w * r.ha, -w * r.hb])
    return grad, hess


@dataclass(frozen=True)
class GbrtConfig:
    rounds: int = 100
    learning_rate: float = 0.1
    max_depth: int = 3
    min_leaf_rows: int = 20
    l2_leaf: float = 1.0
    seed: int = 0
    h_floor: float = 1e-6

    def __post_init__(self):
        if self.rounds < 0:
            raise ValueError("rounds must be nonnegative")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.max_depth < 0 or self.min_leaf_rows < 1 or self.l2_leaf < 0:
            raise ValueError("invalid tree shape settings")


@dataclass(frozen=True)
class Tree:
    """Flat binary tree; ``feature[i] == -1`` marks node ``i`` as a leaf.

    Rows with ``x[feature] <= threshold`` or a missing value go left.
    """

    feature: tuple
    threshold: tuple
    left: tuple
    right: tuple
    delta_a: tuple
    delta_b: tuple

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        feature = np.asarray(self.feature)
        threshold = np.asarray(self.threshold, dtype=float)
        left = np.asarray(self.left)
        right = np.asarray(self.right)
        active = feature[node] >= 0
        while np.any(active):
            idx = np.flatnonzero(active)
            f = feature[node[idx]]
            x = X[idx, f]
            go_left = np.isnan(x) | (x <= threshold[node[idx]])
            node[idx] = np.where(go_left, left[node[idx]], right[node[idx]])
            active = feature[node] >= 0
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        leaf = self.apply(X)
        return np.column_stack([np.asarray(self.delta_a)[leaf], np.asarray(self.delta_b)[leaf]])

    def to_list(self) -> list:
        return [
            {"feature_index": f, "threshold": th, "left": l, "right": r,
             "leaf_delta_a": da, "leaf_delta_b": db}
            for f, th, l, r, da, db in zip(self.feature, self.threshold, self.left,
                                           self.right, self.delta_a, self.delta_b)
        ]

    @classmethod
    def from_list(cls, nodes: list) -> "Tree":
        cols = ("feature_index", "threshold", "left", "right", "leaf_delta_a", "leaf_delta_b")
        feature, threshold, left, right, da, db = (tuple(n[c] for n in nodes) for c in cols)
        return cls(tuple(int(v) for v in feature), tuple(float(v) for v in threshold),
                   tuple(int(v) for v in left), tuple(int(v) for v in right),
                   tuple(float(v) for v in da), tuple(float(v) for v in db))


@dataclass(frozen=True)
class GbrtBetaLogistic:
    trees: tuple
    learning_rate: float
    base_scores: tuple
    max_depth: int
    feature_names: tuple
    clamp: float = SCORE_CLAMP

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def raw_scores(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise DataError(f"model expects {self.n_features} features, got {X.shape[1]}")
        out = np.tile(np.asarray(self.base_scores, dtype=float), (X.shape[0], 1))
        for tree in self.trees:
            out += self.learning_rate * tree.predict(X)
        return out

    def scores(self, X) -> tuple[np.ndarray, np.ndarray]:
        raw = np.clip(self.raw_scores(X), -self.clamp, self.clamp)
        return raw[:, 0], raw[:, 1]

    def params(self, X) -> tuple[np.ndarray, np.ndarray]:
        a, b = self.scores(X)
        return np.exp(a), np.exp(b)

    def predict(self, x) -> BetaParams:
        alpha, beta = self.params(np.asarray(x, dtype=float))
        return BetaParams(float(alpha[0]), float(beta[0]))

    def to_dict(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "model_type": "betalogistic-gbrt",
            "feature_names": list(self.feature_names),
            "learning_rate": self.learning_rate,
            "base_scores": list(self.base_scores),
            "max_depth": self.max_depth,
            "clamp": self.clamp,
            "trees": [tree.to_list() for tree in self.trees],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "GbrtBetaLogistic":
        if doc.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {doc.get('version')!r}")
        return cls(
            tuple(Tree.from_list(t) for t in doc["trees"]),
            float(doc["learning_rate"]),
            tuple(float(v) for v in doc["base_scores"]),
            int(doc["max_depth"]),
            tuple(doc["feature_names"]),
            float(doc.get("clamp", SCORE_CLAMP)),
        )


def predict_gbrt(model: GbrtBetaLogistic, x) -> BetaParams:
    return model.predict(x)


def _best_split(X, rows, sorted_cols, in_node, grad, min_leaf):
    """Best (gain, feature, threshold) for the rows of one node, or None."""
    G = grad[rows].sum(axis=0)
    n = rows.shape[0]
    parent = float(G @ G) / n
    best = None
    for j, order in enumerate(sorted_cols):
        col = X[:, j]
        node_order = order[in_node[order]]
        vals = col[node_order]
        present = ~np.isnan(vals)
        missing = node_order[~present]
        node_order, vals = node_order[present], vals[present]
        if vals.shape[0] < 2 or vals[0] == vals[-1]:
            continue
        g_missing = grad[missing].sum(axis=0) if missing.size else np.zeros(2)
        cum = np.cumsum(grad[node_order], axis=0) + g_missing
        n_left = np.arange(1, vals.shape[0] + 1) + missing.size
        # candidate cut after position i requires vals[i] < vals[i + 1]
        cut = np.flatnonzero(vals[:-1] < vals[1:])
        nl = n_left[cut]
        nr = n - nl
        ok = (nl >= min_leaf) & (nr >= min_leaf)
        if not np.any(ok):
            continue
        cut, nl, nr = cut[ok], nl[ok], nr[ok]
        GL = cum[cut]
        GR = G - GL
        gain = (GL * GL).sum(axis=1) / nl + (GR * GR).sum(axis=1) / nr - parent
        i = int(np.argmax(gain))  # first maximum is the lowest threshold
        if best is None or gain[i] > best[0]:
            threshold = 0.5 * (vals[cut[i]] + vals[cut[i] + 1])
            best = (float(gain[i]), j, float(threshold))
    return best


def _leaf_value(g: np.ndarray, h: np.ndarray, config: GbrtConfig) -> np.ndarray:
    out = np.empty(2)
    for k in range(2):
        if h[:, k].sum() <= 0:
            # nonconvex region: plain gradient step
            out[k] = -g[:, k].mean()
        else:
            out[k] = -g[:, k].sum() / (np.maximum(h[:, k], config.h_floor).sum() + config.l2_leaf)
    return out


def _grow_tree(X, grad, hess, sorted_cols, config: GbrtConfig) -> Tree:
    n = X.shape[0]
    feature, threshold, left, right, delta_a, delta_b = [], [], [], [], [], []

    def new_node():
        for lst, v in ((feature, -1), (threshold, 0.0), (left, -1), (right, -1),
                       (delta_a, 0.0), (delta_b, 0.0)):
            lst.append(v)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(n), 0)]
    in_node = np.zeros(n, dtype=bool)
    while stack:
        node, rows, depth = stack.pop()
        split = None
        if depth < config.max_depth and rows.shape[0] >= 2 * config.min_leaf_rows:
            in_node[:] = False
            in_node[rows] = True
            split = _best_split(X, rows, sorted_cols, in_node, grad, config.min_leaf_rows)
        if split is None or split[0] <= 1e-12:
            value = _leaf_value(grad[rows], hess[rows], config)
            delta_a[node], delta_b[node] = float(value[0]), float(value[1])
            continue
        _, j, thr = split
        x = X[rows, j]
        go_left = np.isnan(x) | (x <= thr)
        feature[node], threshold[node] = j, thr
        left[node] = new_node()
        right[node] = new_node()
        # right pushed first so the left subtree is numbered first
        stack.append((right[node], rows[~go_left], depth + 1))
        stack.append((left[node], rows[go_left], depth + 1))
    return Tree(tuple(feature), tuple(threshold), tuple(left), tuple(right),
                tuple(delta_a), tuple(delta_b))


def intercept_scores(data: SurvivalData) -> tuple[float, float]:
    """Maximum-likelihood ``(a, b)`` ignoring features."""
    bare = SurvivalData(data.t, data.censored, np.zeros((len(data), 0)), data.weight, [])
    model, report = fit_linear(bare, FitConfig(l2_penalty=0.0, gradient_tolerance=1e-10,
                                               max_epochs=2000))
    return model.intercept_a, model.intercept_b


def fit_gbrt(observations, config: GbrtConfig = GbrtConfig(), return_losses: bool = False):
    """Boost a :class:`GbrtBetaLogistic` from the intercept-only fit.

    With ``return_losses=True`` also returns the training loss after every
    round (index 0 is the loss of the base scores).
    """
    data = as_data(observations)
    if len(data) == 0:
        raise TrainingError("cannot train on an empty dataset")
    if np.all(data.censored):
        raise TrainingError("all rows are censored; at least one observed event is required")
    X = data.X
    base = intercept_scores(data)
    scores = np.tile(np.asarray(base, dtype=float), (len(data), 1))
    # NaN sorts last, so missing values sit at the end of each column order
    sorted_cols = [np.argsort(X[:, j], kind="stable") for j in range(X.shape[1])]
    order = time_order(data.t)

    def loss_and_derivs(s):
        a = np.clip(s[:, 0], -SCORE_CLAMP, SCORE_CLAMP)
        b = np.clip(s[:, 1], -SCORE_CLAMP, SCORE_CLAMP)
        r = row_terms(np.exp(a), np.exp(b), data.t, data.censored, order=order)
        w = data.weight
        grad = np.column_stack([-w * r.ga, -w * r.gb])
        hess = np.column_stack([-w * r.ha, -w * r.hb])
        return float(-np.sum(w * r.logp)), grad, hess

    trees = []
    loss, grad, hess = loss_and_derivs(scores)
    losses = [loss]
    for _ in range(config.rounds):
        tree = _grow_tree(X, grad, hess, sorted_cols, config)
        trees.append(tree)
        scores += config.learning_rate * tree.predict(X)
        loss, grad, hess = loss_and_derivs(scores)
        losses.append(loss)
    model = GbrtBetaLogistic(tuple(trees), config.learning_rate, tuple(base),
                             config.max_depth, tuple(data.feature_names))
    if return_losses:
        return model, losses
    return model
