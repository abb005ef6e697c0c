"""Model kinds, hyperparameter domains and default parameter records."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from ..errors import ConfigError


class ModelKind(str, Enum):
    LOGREG = "logreg"
    DTREE = "dtree"
    RFOREST = "rforest"
    GBOOST = "gboost"
    SVM_POLY = "svm_poly"
    SVM_RADIAL = "svm_radial"

    @classmethod
    def parse(cls, value) -> "ModelKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise ConfigError(f"unknown model kind {value!r}; expected one of {names}") from None


TREE_KINDS = frozenset({ModelKind.DTREE, ModelKind.RFOREST, ModelKind.GBOOST})


@dataclass(frozen=True)
class ParamDomain:
    """One tunable hyperparameter.

    ``kind`` is ``continuous``, ``log_continuous``, ``integer`` or
    ``categorical``. Values map to and from the unit interval; see
    :meth:`encode` and :meth:`decode`.
    """

    name: str
    kind: str
    low: float | None = None
    high: float | None = None
    categories: tuple = ()

    def __post_init__(self):
        if self.kind == "categorical":
            if not self.categories:
                raise ConfigError(f"{self.name}: empty category list")
            return
        if self.kind not in ("continuous", "log_continuous", "integer"):
            raise ConfigError(f"{self.name}: unknown domain kind {self.kind!r}")
        if self.low is None or self.high is None or not (math.isfinite(self.low) and math.isfinite(self.high)):
            raise ConfigError(f"{self.name}: bounds must be finite")
        if self.low > self.high:
            raise ConfigError(f"{self.name}: bounds out of order")
        if self.kind == "log_continuous" and self.low <= 0:
            raise ConfigError(f"{self.name}: log domain needs positive bounds")

    def decode(self, u: float):
        u = min(max(float(u), 0.0), 1.0)
        if self.kind == "continuous":
            return self.low + u * (self.high - self.low)
        if self.kind == "log_continuous":
            lo, hi = math.log(self.low), math.log(self.high)
            return min(max(math.exp(lo + u * (hi - lo)), self.low), self.high)
        if self.kind == "integer":
            return int(math.floor(self.low + u * (self.high - self.low) + 0.5))
        k = len(self.categories)
        return self.categories[min(int(u * k), k - 1)]

    def encode(self, value) -> float:
        if self.kind == "categorical":
            try:
                i = self.categories.index(value)
            except ValueError:
                raise ConfigError(f"{self.name}: {value!r} not in {self.categories}") from None
            return (i + 0.5) / len(self.categories)
        if self.high == self.low:
            return 0.5
        if self.kind == "log_continuous":
            lo, hi = math.log(self.low), math.log(self.high)
            return (math.log(value) - lo) / (hi - lo)
        return (float(value) - self.low) / (self.high - self.low)

    def contains(self, value) -> bool:
        if self.kind == "categorical":
            return value in self.categories
        if self.kind == "integer" and int(value) != value:
            return False
        return self.low <= value <= self.high

    def to_dict(self) -> dict:
        if self.kind == "categorical":
            return {"name": self.name, "kind": self.kind, "categories": list(self.categories)}
        return {"name": self.name, "kind": self.kind, "low": self.low, "high": self.high}


def param_space(kind, n_features: int) -> list[ParamDomain]:
    """Search domains per model family (``n_features`` bounds rforest max_features)."""
    kind = ModelKind.parse(kind)
    C = ParamDomain("C", "log_continuous", 1e-4, 1e2)
    gamma = ParamDomain("gamma", "categorical", categories=("scale", "auto"))
    if kind is ModelKind.GBOOST:
        return [
            ParamDomain("n_estimators", "integer", 1, 500),
            ParamDomain("max_depth", "integer", 1, 20),
            ParamDomain("learning_rate", "log_continuous", 1e-10, 1.0),
            ParamDomain("gamma", "continuous", 0.0, 20.0),
            ParamDomain("min_child_weight", "integer", 1, 30),
            ParamDomain("subsample", "continuous", 0.0, 1.0),
            ParamDomain("colsample_bytree", "continuous", 0.0, 1.0),
        ]
    if kind is ModelKind.RFOREST:
        return [
            ParamDomain("n_estimators", "integer", 250, 1250),
            ParamDomain("max_features", "integer", min(2, n_features), max(n_features, 1)),
            ParamDomain("min_samples_leaf", "integer", 1, 20),
        ]
    if kind is ModelKind.SVM_POLY:
        return [C, ParamDomain("degree", "integer", 1, 10), gamma]
    if kind is ModelKind.SVM_RADIAL:
        return [C, gamma]
    if kind is ModelKind.DTREE:
        return [
            ParamDomain("criterion", "categorical", categories=("gini", "entropy")),
            ParamDomain("splitter", "categorical", categories=("best", "random")),
            ParamDomain("max_depth", "integer", 1, 100),
            ParamDomain("min_samples_split", "continuous", 0.0, 1.0),
        ]
    return [C, ParamDomain("penalty", "categorical", categories=("l2", "none"))]


def default_params(kind, n_features: int) -> dict:
    kind = ModelKind.parse(kind)
    if kind is ModelKind.LOGREG:
        return {"C": 1.0, "penalty": "l2"}
    if kind is ModelKind.DTREE:
        # max_depth None = unlimited; min_samples_split 0.0 clamps to 2 rows
        return {"criterion": "gini", "splitter": "best", "max_depth": None, "min_samples_split": 0.0}
    if kind is ModelKind.RFOREST:
        return {
            "n_estimators": 500,
            "max_features": max(1, int(math.sqrt(n_features))),
            "min_samples_leaf": 1,
        }
    if kind is ModelKind.GBOOST:
        return {
            "n_estimators": 100,
            "max_depth": 6,
            "learning_rate": 0.3,
            "gamma": 0.0,
            "min_child_weight": 1,
            "subsample": 1.0,
            "colsample_bytree": 1.0,
        }
    if kind is ModelKind.SVM_POLY:
        return {"C": 1.0, "degree": 3, "gamma": "scale"}
    return {"C": 1.0, "gamma": "scale"}


# Hard validity limits. The search domains above are narrower; explicit
# configurations (small forests, a zero-tree booster) may leave them.
_VALID = {
    "n_estimators": (1, math.inf),
    "max_depth": (1, math.inf),
    "learning_rate": (0.0, math.inf),
    "gamma": (0.0, math.inf),
    "min_child_weight": (0.0, math.inf),
    "subsample": (0.0, 1.0),
    "colsample_bytree": (0.0, 1.0),
    "min_samples_leaf": (1, math.inf),
    "min_samples_split": (0.0, 1.0),
    "C": (0.0, math.inf),
    "degree": (1, math.inf),
}


def validate_params(kind, params: dict, n_features: int) -> dict:
    """Fill defaults and reject unknown names, unknown categories and
    values outside hard validity limits."""
    kind = ModelKind.parse(kind)
    out = default_params(kind, n_features)
    domains = {d.name: d for d in param_space(kind, n_features)}
    extra = set(params) - set(out)
    if extra:
        raise ConfigError(f"{kind.value}: unknown hyperparameters {sorted(extra)}")
    out.update(params)
    for name, value in out.items():
        if value is None and name == "max_depth" and kind is ModelKind.DTREE:
            continue
        dom = domains.get(name)
        if dom is not None and dom.kind == "categorical":
            if value not in dom.categories:
                raise ConfigError(f"{kind.value}: {name}={value!r} not one of {list(dom.categories)}")
            continue
        if name == "max_features":
            lo, hi = 1, max(n_features, 1)
        elif name == "n_estimators" and kind is ModelKind.GBOOST:
            lo, hi = 0, math.inf  # zero trees predicts the training prior
        else:
            lo, hi = _VALID[name]
        try:
            v = float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{kind.value}: {name}={value!r} is not numeric") from None
        if not lo <= v <= hi or (name in ("C", "learning_rate") and v <= 0):
            raise ConfigError(f"{kind.value}: {name}={value!r} outside [{lo}, {hi}]")
    return out
