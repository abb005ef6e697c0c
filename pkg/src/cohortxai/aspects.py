"""Consolidating correlated features into aspects.

Features are clustered on the distance ``1 - |rho|`` (Spearman) with
complete linkage; cutting the dendrogram at ``1 - H`` leaves groups whose
members all correlate at ``|rho| >= H``.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .explain import DEFAULT_SAMPLES, Explanation, kernel_shap
from .importance import PermutationResult, group_permutation_importance


def spearman_matrix(X) -> np.ndarray:
    """Spearman correlation on midranks with pairwise exclusion of missing cells.

    A constant column correlates 0 with everything else.
    """
    X = np.asarray(getattr(X, "values", X), dtype=float)
    n, d = X.shape
    if n < 2:
        raise ValueError("need at least two rows")
    rho = np.eye(d)
    missing = np.isnan(X)
    if not missing.any():
        R = np.apply_along_axis(stats.rankdata, 0, X)
        R = R - R.mean(axis=0)
        norm = np.sqrt((R * R).sum(axis=0))
        const = norm == 0
        safe = np.where(const, 1.0, norm)
        C = (R.T @ R) / np.outer(safe, safe)
        C[const, :] = 0.0
        C[:, const] = 0.0
        np.fill_diagonal(C, 1.0)
        rho = np.clip(C, -1.0, 1.0)
    else:
        const = np.zeros(d, dtype=bool)
        for i in range(d):
            for j in range(i + 1, d):
                ok = ~(missing[:, i] | missing[:, j])
                rho[i, j] = rho[j, i] = _spearman_pair(X[ok, i], X[ok, j])
        for j in range(d):
            col = X[~missing[:, j], j]
            const[j] = len(col) < 2 or np.all(col == col[0])
    if const.any():
        warnings.warn(f"constant columns {np.flatnonzero(const).tolist()} get correlation 0", stacklevel=2)
    return rho


def _spearman_pair(a, b) -> float:
    if len(a) < 2:
        return 0.0
    ra, rb = stats.rankdata(a), stats.rankdata(b)
    ra, rb = ra - ra.mean(), rb - rb.mean()
    den = np.sqrt((ra * ra).sum() * (rb * rb).sum())
    return float(np.clip((ra * rb).sum() / den, -1, 1)) if den > 0 else 0.0


@dataclass(frozen=True)
class Dendrogram:
    """Merge sequence in scipy linkage layout.

    Row ``k`` of ``merges`` is ``(a, b, height, size)``; ids below ``n``
    are features, id ``n + k`` is the cluster made at step ``k``.
    """

    merges: np.ndarray
    labels: tuple
    distance: np.ndarray

    @property
    def n(self) -> int:
        return len(self.labels)

    def to_dict(self) -> dict:
        return {"labels": list(self.labels), "merges": self.merges.tolist()}


def build_dendrogram(rho, labels=None) -> Dendrogram:
    """Complete-linkage agglomeration on ``1 - |rho|``.

    Ties go to the pair with the smallest cluster ids.
    """
    rho = np.asarray(rho, dtype=float)
    n = rho.shape[0]
    labels = tuple(labels) if labels is not None else tuple(f"x{j}" for j in range(n))
    D = 1.0 - np.abs(rho)
    np.fill_diagonal(D, 0.0)
    dist = {}
    for i in range(n):
        for j in range(i + 1, n):
            dist[(i, j)] = max(D[i, j], 0.0)
    active = {i: 1 for i in range(n)}
    merges = []
    for step in range(n - 1):
        (a, b), h = min(dist.items(), key=lambda kv: (kv[1], kv[0]))
        new = n + step
        size = active.pop(a) + active.pop(b)
        for c in list(active):
            dac = dist.pop((min(a, c), max(a, c)))
            dbc = dist.pop((min(b, c), max(b, c)))
            dist[(c, new)] = max(dac, dbc)
        del dist[(a, b)]
        active[new] = size
        merges.append((a, b, h, size))
    return Dendrogram(np.array(merges, dtype=float).reshape(-1, 4), labels, D)


@dataclass(frozen=True)
class Aspect:
    name: str
    features: tuple
    indices: tuple


@dataclass(frozen=True)
class AspectPartition:
    aspects: tuple
    threshold: float

    def groups(self) -> list[list[int]]:
        return [list(a.indices) for a in self.aspects]

    def names(self) -> list[str]:
        return [a.name for a in self.aspects]

    def to_list(self) -> list[dict]:
        return [{"name": a.name, "features": list(a.features)} for a in self.aspects]

    def to_json(self) -> str:
        return json.dumps(self.to_list(), indent=2)

    @classmethod
    def singletons(cls, names) -> "AspectPartition":
        return cls(tuple(Aspect(n, (n,), (i,)) for i, n in enumerate(names)), 1.0)

    @classmethod
    def from_list(cls, items, feature_names, threshold=float("nan")) -> "AspectPartition":
        pos = {n: i for i, n in enumerate(feature_names)}
        aspects = tuple(
            Aspect(it["name"], tuple(it["features"]), tuple(pos[f] for f in it["features"])) for it in items
        )
        return cls(aspects, threshold)


def cut_aspects(dendrogram: Dendrogram, H: float) -> AspectPartition:
    """Groups formed by merges at height ``<= 1 - H``.

    Singletons keep their feature name; groups are named ``aspect_k`` in the
    order their final merge happened.
    """
    if not 0 < H <= 1:
        raise ValueError("H must lie in (0, 1]")
    n = dendrogram.n
    cut = 1.0 - H + 1e-12
    members = {i: [i] for i in range(n)}
    completed = {}
    for step, (a, b, h, _) in enumerate(dendrogram.merges):
        if h > cut:
            break
        new = n + step
        members[new] = members.pop(int(a)) + members.pop(int(b))
        completed[new] = step
    aspects = []
    groups = sorted(members.items(), key=lambda kv: (completed.get(kv[0], -1), min(kv[1])))
    k = 0
    singles, multis = [], []
    for cid, idx in groups:
        (multis if len(idx) > 1 else singles).append(sorted(idx))
    for idx in multis:
        k += 1
        aspects.append(Aspect(f"aspect_{k}", tuple(dendrogram.labels[i] for i in idx), tuple(idx)))
    for idx in sorted(singles):
        aspects.append(Aspect(dendrogram.labels[idx[0]], (dendrogram.labels[idx[0]],), tuple(idx)))
    part = AspectPartition(tuple(aspects), H)
    _verify(part, dendrogram.distance, H)
    return part


def _verify(part: AspectPartition, D, H):
    for a in part.aspects:
        if len(a.indices) > 1:
            sub = D[np.ix_(a.indices, a.indices)]
            if 1.0 - sub.max() < H - 1e-9:
                raise AssertionError(f"{a.name}: within-aspect |rho| below {H}")


def aspect_permutation_importance(model, X, y, partition: AspectPartition, metric="accuracy",
                                  n_repeats=10, seed=0) -> PermutationResult:
    """Metric drop when each aspect's columns share one row permutation."""
    X = np.asarray(getattr(X, "values", X), dtype=float)
    return group_permutation_importance(model, X, y, partition.groups(), partition.names(), metric, n_repeats, seed)


def aspect_shap(model, background, x, partition: AspectPartition, n_samples=DEFAULT_SAMPLES, seed=0,
                subject_id=None) -> Explanation:
    """Kernel SHAP with aspects as players (an aspect's features toggle together)."""
    return kernel_shap(model, background, x, n_samples, seed, groups=partition.groups(),
                       player_names=partition.names(), subject_id=subject_id)
