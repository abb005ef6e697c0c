"""Permutation importance and rank agreement between importance methods."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import ConfigError, UndefinedCorrelationError, UndefinedScoreError
from . import metrics as _m


def as_predict_fn(model):
    """Probability function of a fitted model or a plain callable."""
    if hasattr(model, "predict_proba"):
        return lambda X: np.asarray(model.predict_proba(X), dtype=float)
    if callable(model):
        return lambda X: np.asarray(model(X), dtype=float)
    raise TypeError("model must expose predict_proba or be callable")


def _accuracy(y, p):
    return float(np.mean((p >= 0.5).astype(int) == y))


def _balanced(y, p):
    return _m.classification_scores(_m.confusion(y, p >= 0.5))[1]


def _f1(y, p):
    return _m.classification_scores(_m.confusion(y, p >= 0.5))[2]


def _mcc(y, p):
    return _m.classification_scores(_m.confusion(y, p >= 0.5))[3]


def _auc(y, p):
    try:
        return _m.auroc(y, p)
    except UndefinedScoreError:
        return float("nan")


METRICS = {
    "accuracy": _accuracy,
    "balanced_accuracy": _balanced,
    "f1_macro": _f1,
    "mcc": _mcc,
    "auroc": _auc,
}


def metric_fn(name):
    try:
        return METRICS[name]
    except KeyError:
        raise ConfigError(f"unknown metric {name!r}; choose from {sorted(METRICS)}") from None


@dataclass(frozen=True)
class PermutationResult:
    """Mean and spread of the metric drop per group of jointly permuted columns."""

    names: tuple
    importances: np.ndarray
    std: np.ndarray
    baseline: float
    permuted_scores: np.ndarray  # shape (n_groups, n_repeats)
    metric: str = "accuracy"

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "baseline": self.baseline,
            "entries": [
                {"name": n, "importance": float(m), "std": float(s)}
                for n, m, s in zip(self.names, self.importances, self.std)
            ],
        }

    def ranking(self, method: str = "permutation") -> "Ranking":
        return Ranking.from_scores(method, self.names, self.importances)


def group_permutation_importance(model, X, y, groups, names, metric="accuracy", n_repeats=10, seed=0):
    """Drop in ``metric`` when all columns of a group share one row shuffle."""
    score = metric_fn(metric)
    f = as_predict_fn(model)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y).astype(int)
    baseline = score(y, f(X))
    permuted = np.empty((len(groups), n_repeats))
    for g, cols in enumerate(groups):
        cols = list(cols)
        for r in range(n_repeats):
            rng = np.random.default_rng([seed, g, r])
            perm = rng.permutation(len(X))
            Xp = X.copy()
            Xp[:, cols] = X[perm][:, cols]
            permuted[g, r] = score(y, f(Xp))
    drops = baseline - permuted
    return PermutationResult(tuple(names), drops.mean(axis=1), drops.std(axis=1), baseline, permuted, metric)


def permutation_importance(model, X, y, metric="accuracy", n_repeats=10, seed=0, feature_names=None):
    if hasattr(X, "feature_names") and hasattr(X, "values"):
        feature_names = feature_names or list(X.feature_names)
        X = X.values
    X = np.asarray(X, dtype=float)
    if feature_names is None:
        feature_names = getattr(model, "feature_names", None) or [f"x{j}" for j in range(X.shape[1])]
    groups = [[j] for j in range(X.shape[1])]
    return group_permutation_importance(model, X, y, groups, feature_names, metric, n_repeats, seed)


# -- rankings ----------------------------------------------------------------


@dataclass(frozen=True)
class Ranking:
    """Features ordered most important first, optionally with their scores."""

    method: str
    features: tuple
    scores: tuple | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(self.features))
        if len(set(self.features)) != len(self.features):
            raise ValueError(f"{self.method}: duplicate features in ranking")
        if self.scores is not None:
            s = tuple(float(v) for v in self.scores)
            if len(s) != len(self.features):
                raise ValueError(f"{self.method}: {len(s)} scores for {len(self.features)} features")
            if any(a < b for a, b in zip(s, s[1:])):
                raise ValueError(f"{self.method}: order inconsistent with scores")
            object.__setattr__(self, "scores", s)

    @classmethod
    def from_scores(cls, method, names, scores) -> "Ranking":
        scores = [float(s) for s in scores]
        order = sorted(range(len(scores)), key=lambda j: (-scores[j], j))
        return cls(method, [names[j] for j in order], [scores[j] for j in order])

    def values(self) -> dict:
        """Importance value per feature (negated position without scores)."""
        if self.scores is not None:
            return dict(zip(self.features, self.scores))
        return {f: -float(i) for i, f in enumerate(self.features)}

    def top(self, k: int) -> list[str]:
        return list(self.features[:k])

    def to_dict(self) -> dict:
        return {"method": self.method, "features": list(self.features),
                "scores": None if self.scores is None else list(self.scores)}

    @classmethod
    def from_dict(cls, d) -> "Ranking":
        return cls(d["method"], d["features"], d.get("scores"))


def common_values(a: Ranking, b: Ranking):
    va, vb = a.values(), b.values()
    common = [f for f in a.features if f in vb]
    return np.array([va[f] for f in common]), np.array([vb[f] for f in common]), common


def kendall_tau(a: Ranking, b: Ranking) -> float:
    """Tau-b between two rankings on their shared features."""
    xa, xb, common = common_values(a, b)
    if len(common) < 2:
        raise UndefinedCorrelationError(f"{a.method} vs {b.method}: fewer than 2 common features")
    if np.all(xa == xa[0]) or np.all(xb == xb[0]):
        raise UndefinedCorrelationError(f"{a.method} vs {b.method}: a ranking is constant on common features")
    tau = stats.kendalltau(xa, xb, variant="b").statistic
    return float(tau)


@dataclass(frozen=True)
class LabeledMatrix:
    labels: tuple
    values: np.ndarray
    coverage: np.ndarray | None = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", *self.labels])
        for lab, row in zip(self.labels, self.values):
            w.writerow([lab, *("" if np.isnan(v) else f"{v:.6f}" for v in row)])
        return buf.getvalue()

    def __getitem__(self, key):
        a, b = key
        return self.values[self.labels.index(a), self.labels.index(b)]


def ranking_correlation_matrix(rankings) -> LabeledMatrix:
    """Pairwise tau-b; undefined pairs are NaN. ``coverage`` counts shared features."""
    rankings = list(rankings)
    if len(rankings) < 2:
        raise ValueError("need at least two rankings")
    k = len(rankings)
    M = np.eye(k)
    cover = np.zeros((k, k), dtype=int)
    for i in range(k):
        cover[i, i] = len(rankings[i].features)
        for j in range(i + 1, k):
            cover[i, j] = cover[j, i] = len(set(rankings[i].features) & set(rankings[j].features))
            try:
                M[i, j] = M[j, i] = kendall_tau(rankings[i], rankings[j])
            except UndefinedCorrelationError:
                M[i, j] = M[j, i] = np.nan
    return LabeledMatrix(tuple(r.method for r in rankings), M, cover)


def rankings_to_json(rankings) -> str:
    return json.dumps([r.to_dict() for r in rankings], indent=2)
