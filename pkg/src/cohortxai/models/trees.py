"""CART decision trees and random forests."""
from __future__ import annotations

import math

import numpy as np

from . import _kernels
from .base import TrainedModel, _frozen
from .params import ModelKind

_CRITERIA = {"gini": 0, "entropy": 1}
_RAND_CAP = 1 << 16


class Tree:
    """Flat binary tree. ``feature == -1`` marks a leaf; rows with
    ``x[feature] <= threshold`` go left."""

    __slots__ = ("feature", "threshold", "left", "right", "value", "weight", "importance")

    def __init__(self, feature, threshold, left, right, value, weight, importance):
        self.feature = _frozen(feature, np.int64)
        self.threshold = _frozen(threshold)
        self.left = _frozen(left, np.int64)
        self.right = _frozen(right, np.int64)
        self.value = _frozen(value)
        self.weight = _frozen(weight)
        self.importance = _frozen(importance)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_splits(self) -> int:
        return int(np.sum(self.feature >= 0))

    def predict(self, X) -> np.ndarray:
        return _kernels.predict_packed(
            self.feature, self.threshold, self.left, self.right, self.value, np.zeros(1, np.int64),
            np.ascontiguousarray(X, dtype=float),
        )

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in self.__slots__}

    @classmethod
    def from_dict(cls, d) -> "Tree":
        return cls(*(d[k] for k in cls.__slots__))


class PackedTrees:
    """All trees of an ensemble concatenated for one compiled traversal."""

    def __init__(self, trees):
        offsets = np.cumsum([0] + [t.n_nodes for t in trees[:-1]]).astype(np.int64) if trees else np.zeros(0, np.int64)
        self.roots = offsets
        if trees:
            self.feature = np.concatenate([t.feature for t in trees])
            self.threshold = np.concatenate([t.threshold for t in trees])
            self.value = np.concatenate([t.value for t in trees])
            self.left = np.concatenate([np.where(t.left >= 0, t.left + o, -1) for t, o in zip(trees, offsets)])
            self.right = np.concatenate([np.where(t.right >= 0, t.right + o, -1) for t, o in zip(trees, offsets)])
        else:
            self.feature = np.full(1, -1, np.int64)
            self.threshold = self.value = np.zeros(1)
            self.left = self.right = np.full(1, -1, np.int64)

    def sum(self, X) -> np.ndarray:
        return _kernels.predict_packed(self.feature, self.threshold, self.left, self.right, self.value, self.roots, X)


def grow_cart(X, y, rows, rng, criterion="gini", splitter="best", max_depth=None,
              min_samples_split=2, min_samples_leaf=1, max_features=None) -> Tree:
    d = X.shape[1]
    mf = d if max_features is None else int(min(max(max_features, 1), d))
    depth = np.iinfo(np.int64).max if max_depth is None else int(max_depth)
    n_rand = min((2 * len(rows) + 1) * (mf + 1), _RAND_CAP)
    rand = rng.random(max(n_rand, 1))
    out = _kernels.build_cart(
        X, y.astype(float), np.asarray(rows, dtype=np.int64), _CRITERIA[criterion], splitter == "random",
        depth, int(min_samples_split), int(min_samples_leaf), mf, rand,
    )
    return Tree(*out)


def _min_split_rows(frac, n):
    """Fractional ``min_samples_split`` to a row count (never below 2)."""
    if isinstance(frac, (int, np.integer)) and not isinstance(frac, bool) and frac >= 2:
        return int(frac)
    return max(2, int(math.ceil(float(frac) * n)))


class DecisionTreeModel(TrainedModel):
    kind = ModelKind.DTREE

    def __init__(self, params, feature_names, class_prior, tree: Tree):
        super().__init__(params, feature_names, class_prior)
        self.tree = tree
        self._packed = PackedTrees([tree])

    @classmethod
    def fit(cls, X, y, params, feature_names, seed=None):
        rng = np.random.default_rng(seed)
        tree = grow_cart(
            X, y, np.arange(len(y)), rng,
            criterion=params["criterion"],
            splitter=params["splitter"],
            max_depth=params["max_depth"],
            min_samples_split=_min_split_rows(params["min_samples_split"], len(y)),
        )
        return cls(params, feature_names, y.mean(), tree)

    def _predict(self, X):
        return self._packed.sum(X)

    def feature_importance(self) -> np.ndarray:
        return _normalize(self.tree.importance)

    def _state(self):
        return {"tree": self.tree.to_dict()}

    @classmethod
    def _from_state(cls, params, feature_names, class_prior, state):
        return cls(params, feature_names, class_prior, Tree.from_dict(state["tree"]))


class RandomForestModel(TrainedModel):
    """Bagged CART trees; probability is the mean leaf class-1 fraction."""

    kind = ModelKind.RFOREST

    def __init__(self, params, feature_names, class_prior, trees):
        super().__init__(params, feature_names, class_prior)
        self.trees = tuple(trees)
        self._packed = PackedTrees(list(self.trees))

    @classmethod
    def fit(cls, X, y, params, feature_names, seed=None, bootstrap=True):
        rng = np.random.default_rng(seed)
        n = len(y)
        trees = []
        for _ in range(int(params["n_estimators"])):
            rows = rng.integers(0, n, n) if bootstrap else np.arange(n)
            trees.append(
                grow_cart(
                    X, y, rows, rng,
                    min_samples_leaf=params["min_samples_leaf"],
                    max_features=params["max_features"],
                )
            )
        return cls(params, feature_names, y.mean(), trees)

    def _predict(self, X):
        return self._packed.sum(X) / max(len(self.trees), 1)

    def feature_importance(self) -> np.ndarray:
        if not self.trees:
            return np.zeros(self.n_features)
        return _normalize(np.mean([_normalize(t.importance) for t in self.trees], axis=0))

    def _state(self):
        return {"trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def _from_state(cls, params, feature_names, class_prior, state):
        return cls(params, feature_names, class_prior, [Tree.from_dict(t) for t in state["trees"]])


def _normalize(w) -> np.ndarray:
    w = np.maximum(np.asarray(w, dtype=float), 0.0)
    s = w.sum()
    return w / s if s > 0 else w.copy()
