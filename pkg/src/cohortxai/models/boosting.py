"""Second-order gradient boosting with logistic loss (XGBoost-style learner)."""
from __future__ import annotations

import math

import numpy as np

from . import _kernels
from .base import TrainedModel
from .linear import sigmoid
from .params import ModelKind
from .trees import PackedTrees, Tree, _normalize

LEAF_L2 = 1.0


def logistic_loss(y, margin) -> float:
    return float(np.mean(np.logaddexp(0.0, margin) - y * margin))


class BoostedTreesModel(TrainedModel):
    """Additive logit model: base score plus learning-rate-scaled leaf weights."""

    kind = ModelKind.GBOOST

    def __init__(self, params, feature_names, class_prior, base_score, trees, loss_trace=()):
        super().__init__(params, feature_names, class_prior)
        self.base_score = float(base_score)
        self.trees = tuple(trees)
        self.loss_trace = tuple(float(v) for v in loss_trace)
        self._packed = PackedTrees(list(self.trees))

    @classmethod
    def fit(cls, X, y, params, feature_names, seed=None):
        rng = np.random.default_rng(seed)
        n, d = X.shape
        prior = float(np.clip(y.mean(), 1e-12, 1 - 1e-12))
        base = math.log(prior / (1 - prior))
        eta = float(params["learning_rate"])
        n_rows = n if params["subsample"] >= 1 else max(1, int(round(params["subsample"] * n)))
        n_cols = d if params["colsample_bytree"] >= 1 else max(1, int(round(params["colsample_bytree"] * d)))
        margin = np.full(n, base)
        loss_trace = [logistic_loss(y, margin)]
        trees = []
        yf = y.astype(float)
        for _ in range(int(params["n_estimators"])):
            p = sigmoid(margin)
            g = p - yf
            h = p * (1 - p)
            rows = np.arange(n) if n_rows == n else np.sort(rng.choice(n, n_rows, replace=False))
            cols = np.arange(d) if n_cols == d else np.sort(rng.choice(d, n_cols, replace=False))
            out = _kernels.build_boost_tree(
                X, g, h, rows.astype(np.int64), cols.astype(np.int64),
                int(params["max_depth"]), float(params["min_child_weight"]), float(params["gamma"]), LEAF_L2,
            )
            tree = Tree(*out)
            trees.append(tree)
            margin = margin + eta * tree.predict(X)
            loss_trace.append(logistic_loss(y, margin))
        return cls(params, feature_names, y.mean(), base, trees, loss_trace)

    def decision_function(self, X):
        return self._margin(self._matrix(X))

    def _margin(self, X):
        if not self.trees:
            return np.full(len(X), self.base_score)
        return self.base_score + float(self.params["learning_rate"]) * self._packed.sum(X)

    def _predict(self, X):
        return sigmoid(self._margin(X))

    def feature_importance(self) -> np.ndarray:
        """Total split gain per feature, normalised."""
        if not self.trees:
            return np.zeros(self.n_features)
        return _normalize(np.sum([t.importance for t in self.trees], axis=0))

    def _state(self):
        return {
            "base_score": self.base_score,
            "trees": [t.to_dict() for t in self.trees],
            "loss_trace": list(self.loss_trace),
        }

    @classmethod
    def _from_state(cls, params, feature_names, class_prior, state):
        trees = [Tree.from_dict(t) for t in state["trees"]]
        return cls(params, feature_names, class_prior, state["base_score"], trees, state.get("loss_trace", ()))
