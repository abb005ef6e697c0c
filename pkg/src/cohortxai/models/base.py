"""Shared contract for fitted classifiers."""
from __future__ import annotations

import json

import numpy as np

from ..errors import ColumnMismatchError, FormatVersionError
from .params import ModelKind

FORMAT = "cohortxai-model"
FORMAT_VERSION = 1


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.flags.writeable = False
    return a


class TrainedModel:
    """A fitted binary classifier; ``predict_proba`` returns P(class 1)."""

    kind: ModelKind

    def __init__(self, params: dict, feature_names, class_prior: float):
        self.params = dict(params)
        self.feature_names = tuple(feature_names)
        self.class_prior = float(class_prior)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def predict_proba(self, X, feature_names=None) -> np.ndarray:
        M = self._matrix(X, feature_names)
        p = self._predict(M)
        return np.clip(p, 0.0, 1.0)

    def predict(self, X, feature_names=None) -> np.ndarray:
        return (self.predict_proba(X, feature_names) >= 0.5).astype(int)

    def __call__(self, X):
        return self.predict_proba(X)

    def _predict(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _matrix(self, X, names=None) -> np.ndarray:
        if hasattr(X, "feature_names") and hasattr(X, "values") and names is None:
            names = list(X.feature_names)
            X = X.values
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if names is not None:
            names = list(names)
            missing = [n for n in self.feature_names if n not in names]
            if missing:
                extra = [n for n in names if n not in self.feature_names]
                raise ColumnMismatchError(missing, extra)
            if names != list(self.feature_names):
                X = X[:, [names.index(n) for n in self.feature_names]]
        elif X.shape[1] != self.n_features:
            raise ColumnMismatchError(self.feature_names[X.shape[1]:], ())
        if not np.all(np.isfinite(X)):
            raise ValueError("feature matrix contains non-finite values")
        return np.ascontiguousarray(X)

    # -- serialisation ----------------------------------------------------

    def _state(self) -> dict:
        raise NotImplementedError

    @classmethod
    def _from_state(cls, params, feature_names, class_prior, state):
        raise NotImplementedError

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "version": FORMAT_VERSION,
            "kind": self.kind.value,
            "params": self.params,
            "feature_names": list(self.feature_names),
            "class_prior": self.class_prior,
            "state": self._state(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def model_from_dict(doc: dict) -> TrainedModel:
    from . import registry

    if doc.get("format") != FORMAT:
        raise FormatVersionError(f"not a model document (format={doc.get('format')!r})")
    if doc.get("version") != FORMAT_VERSION:
        raise FormatVersionError(
            f"model document version {doc.get('version')!r}; this build reads version {FORMAT_VERSION}"
        )
    kind = ModelKind.parse(doc["kind"])
    cls = registry()[kind]
    return cls._from_state(doc["params"], doc["feature_names"], doc["class_prior"], doc["state"])


def model_from_json(text: str) -> TrainedModel:
    return model_from_dict(json.loads(text))
