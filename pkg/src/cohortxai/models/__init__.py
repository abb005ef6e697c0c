"""From-scratch classifiers behind one fit / predict-probability contract."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import TrainingError, UnsupportedOperationError
from .base import TrainedModel, model_from_dict, model_from_json
from .boosting import BoostedTreesModel
from .linear import LogisticModel, sigmoid
from .params import TREE_KINDS, ModelKind, ParamDomain, default_params, param_space, validate_params
from .svm import PolySVM, RadialSVM, SVMModel
from .trees import DecisionTreeModel, RandomForestModel, Tree

__all__ = [
    "ModelKind",
    "ParamDomain",
    "TrainedModel",
    "default_params",
    "param_space",
    "validate_params",
    "train",
    "predict_proba",
    "natural_importance",
    "log_odds",
    "LogOdds",
    "model_from_dict",
    "model_from_json",
    "sigmoid",
]


def registry() -> dict:
    return {
        ModelKind.LOGREG: LogisticModel,
        ModelKind.DTREE: DecisionTreeModel,
        ModelKind.RFOREST: RandomForestModel,
        ModelKind.GBOOST: BoostedTreesModel,
        ModelKind.SVM_POLY: PolySVM,
        ModelKind.SVM_RADIAL: RadialSVM,
    }


def train(kind, params, X, y, seed=0, feature_names=None, **options) -> TrainedModel:
    """Fit a classifier of family ``kind``.

    ``X`` is a preprocessed matrix (or a dataset exposing ``values`` and
    ``feature_names``); ``params`` may be partial, missing entries take the
    family defaults. ``options`` reach the family's fit (e.g. ``bootstrap``
    for random forests).
    """
    kind = ModelKind.parse(kind)
    if hasattr(X, "feature_names") and hasattr(X, "values"):
        feature_names = list(X.feature_names) if feature_names is None else feature_names
        X = X.values
    X = np.ascontiguousarray(X, dtype=float)
    if X.ndim != 2:
        raise TrainingError("X must be two-dimensional")
    y = np.asarray(y).astype(np.int64)
    if len(y) != len(X):
        raise TrainingError(f"{len(X)} rows but {len(y)} labels")
    if feature_names is None:
        feature_names = [f"x{j}" for j in range(X.shape[1])]
    if not np.all(np.isfinite(X)):
        raise TrainingError("non-finite feature value; preprocess before training")
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) < 2:
        raise TrainingError("training labels contain a single class")
    params = validate_params(kind, dict(params or {}), X.shape[1])
    return registry()[kind].fit(X, y, params, list(feature_names), seed=seed, **options)


def predict_proba(model: TrainedModel, X, feature_names=None) -> np.ndarray:
    return model.predict_proba(X, feature_names)


def natural_importance(model: TrainedModel) -> np.ndarray:
    """Impurity decrease (CART, forests) or total split gain (boosting) per
    feature, normalised to sum 1 whenever the model splits at all."""
    if model.kind not in TREE_KINDS:
        raise UnsupportedOperationError(f"natural importance is defined for tree models, not {model.kind.value}")
    return model.feature_importance()


@dataclass(frozen=True)
class LogOdds:
    feature_names: tuple
    coef: np.ndarray
    ranking: tuple

    @property
    def odds_ratio(self) -> np.ndarray:
        return np.exp(self.coef)

    def ranked_names(self) -> list[str]:
        return [self.feature_names[i] for i in self.ranking]


def log_odds(model: TrainedModel) -> LogOdds:
    """Coefficients of a logistic model, ranked by absolute value."""
    if model.kind is not ModelKind.LOGREG:
        raise UnsupportedOperationError(f"log odds are defined for logreg, not {model.kind.value}")
    coef = np.array(model.coef)
    order = sorted(range(len(coef)), key=lambda j: (-abs(coef[j]), j))
    return LogOdds(model.feature_names, coef, tuple(order))
