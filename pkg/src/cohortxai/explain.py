"""Shapley explanations of class-1 probability.

Players are single features or groups of features (aspects). Features
outside a coalition are marginalised interventionally: they take the
background rows' values while coalition members keep the subject's.
"""
from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .errors import ExplanationError, RankDeficiencyError
from .importance import as_predict_fn

EXACT_LIMIT = 15
DEFAULT_SAMPLES = 2048
_ROWS_PER_CALL = 262_144


@dataclass(frozen=True)
class Explanation:
    """Additive decomposition ``prediction = base_value + sum(phi)``."""

    base_value: float
    phi: np.ndarray
    prediction: float
    feature_values: np.ndarray
    feature_names: tuple
    n_players: int
    player_names: tuple = ()
    subject_id: str | None = None

    @property
    def names(self) -> tuple:
        return self.player_names or self.feature_names

    def additivity_gap(self) -> float:
        return abs(self.base_value + float(np.sum(self.phi)) - self.prediction)

    def to_dict(self) -> dict:
        names = self.names
        grouped = bool(self.player_names) and self.player_names != self.feature_names
        entries = []
        for i, name in enumerate(names):
            e = {"feature": name, "phi": float(self.phi[i])}
            if not grouped:
                v = float(self.feature_values[i])
                e["value"] = None if math.isnan(v) else v
            entries.append(e)
        d = {"base_value": self.base_value, "prediction": self.prediction, "entries": entries}
        if self.subject_id is not None:
            d["subject_id"] = self.subject_id
        return d

    @classmethod
    def from_dict(cls, d) -> "Explanation":
        entries = d["entries"]
        names = tuple(e["feature"] for e in entries)
        grouped = any("value" not in e for e in entries)
        values = np.array([np.nan if grouped or e["value"] is None else e["value"] for e in entries])
        return cls(float(d["base_value"]), np.array([e["phi"] for e in entries]), float(d["prediction"]),
                   values, names, len(names), names if grouped else (), d.get("subject_id"))


def _players(groups, d):
    if groups is None:
        return [np.array([j]) for j in range(d)]
    groups = [np.asarray(g, dtype=int) for g in groups]
    cover = np.concatenate(groups) if groups else np.zeros(0, int)
    if len(cover) != len(set(cover.tolist())):
        raise ValueError("player groups overlap")
    return groups


def _prepare(model, background, x):
    f = as_predict_fn(model)
    bg = np.asarray(getattr(background, "values", background), dtype=float)
    if bg.ndim != 2 or len(bg) == 0:
        raise ValueError("background must be a non-empty 2-D table")
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != bg.shape[1]:
        raise ValueError(f"subject has {x.shape[0]} values, background has {bg.shape[1]} columns")
    return f, bg, x


def coalition_values(f, background, x, masks, groups) -> np.ndarray:
    """Mean prediction over background with coalition players set to ``x``."""
    masks = np.asarray(masks, dtype=bool)
    K, B, d = len(masks), len(background), len(x)
    colmask = np.zeros((K, d), dtype=bool)
    for p, cols in enumerate(groups):
        colmask[:, cols] = masks[:, p : p + 1]
    out = np.empty(K)
    step = max(1, _ROWS_PER_CALL // max(B, 1))
    for s in range(0, K, step):
        cm = colmask[s : s + step]
        data = np.where(cm[:, None, :], x[None, None, :], background[None, :, :])
        out[s : s + step] = f(data.reshape(-1, d)).reshape(len(cm), B).mean(axis=1)
    return out


def _feature_names(model, background, d):
    names = getattr(background, "feature_names", None) or getattr(model, "feature_names", None)
    return tuple(names) if names is not None and len(names) == d else tuple(f"x{j}" for j in range(d))


def exact_shapley(model, background, x, groups=None, player_names=None, subject_id=None) -> Explanation:
    """Shapley values by enumerating every coalition (at most 15 players)."""
    f, bg, x = _prepare(model, background, x)
    players = _players(groups, len(x))
    M = len(players)
    if M > EXACT_LIMIT:
        raise ValueError(f"{M} players exceed the exact limit of {EXACT_LIMIT}; use kernel_shap")
    codes = np.arange(1 << M)
    masks = ((codes[:, None] >> np.arange(M)) & 1).astype(bool)
    v = coalition_values(f, bg, x, masks, players)
    size = masks.sum(axis=1)
    weight = np.array([math.factorial(s) * math.factorial(M - s - 1) / math.factorial(M) for s in range(M)])
    phi = np.zeros(M)
    for i in range(M):
        without = codes[~masks[:, i]]
        phi[i] = np.sum(weight[size[without]] * (v[without | (1 << i)] - v[without]))
    names = _feature_names(model, background, len(x))
    return Explanation(float(v[0]), phi, float(v[-1]), x.copy(), names, M,
                       tuple(player_names) if player_names else (), subject_id)


def shapley_kernel_weight(M: int, s: int) -> float:
    return (M - 1) / (math.comb(M, s) * s * (M - s))


def sample_masks(M: int, n_samples: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Coalition masks (excluding empty and full) with regression weights.

    Sizes whose kernel-proportional share of the budget covers all their
    coalitions are enumerated with exact kernel weights; the remaining budget
    is spread over the other sizes by kernel mass, drawing distinct masks
    uniformly within a size, each carrying an equal share of that size's mass.
    """
    budget = n_samples - 2
    if budget >= (1 << M) - 2:
        codes = np.arange(1, (1 << M) - 1)
        masks = ((codes[:, None] >> np.arange(M)) & 1).astype(bool)
        s = masks.sum(axis=1)
        return masks, np.array([shapley_kernel_weight(M, k) for k in s])

    sizes = list(range(1, M))
    mass = {s: (M - 1) / (s * (M - s)) for s in sizes}
    full, remaining = [], list(sizes)
    while remaining:
        total = sum(mass[s] for s in remaining)
        newly = [s for s in remaining if budget * mass[s] / total >= math.comb(M, s)]
        if not newly:
            break
        for s in newly:
            full.append(s)
            budget -= math.comb(M, s)
            remaining.remove(s)

    masks, weights = [], []
    for s in sorted(full):
        for combo in _combinations_masks(M, s):
            masks.append(combo)
            weights.append(shapley_kernel_weight(M, s))
    if remaining and budget > 0:
        total = sum(mass[s] for s in remaining)
        share = {s: budget * mass[s] / total for s in remaining}
        counts = {s: int(math.floor(share[s])) for s in remaining}
        leftover = budget - sum(counts.values())
        for s in sorted(remaining, key=lambda s: (-(share[s] - counts[s]), s))[:leftover]:
            counts[s] += 1
        for s in remaining:
            k = min(counts[s], math.comb(M, s))
            if k == 0:
                continue
            seen = set()
            while len(seen) < k:
                seen.add(tuple(sorted(rng.choice(M, s, replace=False).tolist())))
            for combo in sorted(seen):
                m = np.zeros(M, dtype=bool)
                m[list(combo)] = True
                masks.append(m)
                weights.append(mass[s] / k)
    return np.array(masks, dtype=bool).reshape(-1, M), np.array(weights)


def _combinations_masks(M, s):
    for combo in combinations(range(M), s):
        m = np.zeros(M, dtype=bool)
        m[list(combo)] = True
        yield m


def kernel_shap(model, background, x, n_samples=DEFAULT_SAMPLES, seed=0, groups=None,
                player_names=None, subject_id=None) -> Explanation:
    """Kernel SHAP estimate with exact efficiency.

    The empty and full coalitions fix the base value and the prediction;
    the last player's value is eliminated from the weighted least squares so
    contributions sum to ``prediction - base_value`` by construction.
    """
    f, bg, x = _prepare(model, background, x)
    players = _players(groups, len(x))
    M = len(players)
    if n_samples < 2 * M + 2:
        raise ValueError(f"n_samples must be at least 2*M+2 = {2 * M + 2}")
    ends = coalition_values(f, bg, x, np.array([np.zeros(M, bool), np.ones(M, bool)]), players)
    base, fx = float(ends[0]), float(ends[1])
    names = _feature_names(model, background, len(x))
    pnames = tuple(player_names) if player_names else ()
    if M == 1:
        return Explanation(base, np.array([fx - base]), fx, x.copy(), names, 1, pnames, subject_id)

    rng = np.random.default_rng(seed)
    masks, w = sample_masks(M, n_samples, rng)
    if len({m.tobytes() for m in masks}) + 2 < M + 1:
        raise RankDeficiencyError(
            f"only {len(masks) + 2} distinct coalitions for {M} players; increase n_samples"
        )
    v = coalition_values(f, bg, x, masks, players)
    Z = masks.astype(float)
    gap = fx - base
    A = Z[:, :-1] - Z[:, -1:]
    b = (v - base) - Z[:, -1] * gap
    AtW = A.T * w
    lhs = AtW @ A + 1e-10 * np.eye(M - 1)
    try:
        head = np.linalg.solve(lhs, AtW @ b)
    except np.linalg.LinAlgError:
        raise RankDeficiencyError("singular coalition design; increase n_samples") from None
    phi = np.append(head, gap - head.sum())
    return Explanation(base, phi, fx, x.copy(), names, M, pnames, subject_id)


def row_seed(seed: int, row) -> list[int]:
    """Per-subject random stream key derived from the seed and the row's values."""
    digest = hashlib.sha256(np.ascontiguousarray(row, dtype=float).tobytes()).digest()
    return [int(seed), int.from_bytes(digest[:8], "little")]


def explain_dataset(model, background, X, n_samples=DEFAULT_SAMPLES, seed=0, subject_ids=None,
                    groups=None, player_names=None, threads=1) -> list[Explanation]:
    """One Kernel SHAP explanation per row, in input order."""
    M = np.asarray(getattr(X, "values", X), dtype=float)
    if subject_ids is None:
        subject_ids = getattr(X, "subject_ids", None)

    def one(i):
        sid = None if subject_ids is None else subject_ids[i]
        try:
            return kernel_shap(model, background, M[i], n_samples, row_seed(seed, M[i]), groups,
                               player_names, sid)
        except Exception as exc:
            raise ExplanationError(i, sid, exc) from exc

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, range(len(M))))
    return [one(i) for i in range(len(M))]


# -- summary and waterfall data ----------------------------------------------


@dataclass(frozen=True)
class SummaryRanking:
    """Players ordered by mean absolute contribution across subjects."""

    features: tuple
    mean_abs: np.ndarray
    points: dict = field(default_factory=dict)
    subject_ids: tuple = ()

    def top(self, k: int = 10) -> list[str]:
        return list(self.features[:k])

    def to_csv(self) -> str:
        lines = ["feature,mean_abs_phi,rank"]
        for r, (f_, m) in enumerate(zip(self.features, self.mean_abs), start=1):
            lines.append(f"{f_},{m:.10g},{r}")
        return "\n".join(lines) + "\n"


def summary_ranking(explanations) -> SummaryRanking:
    explanations = list(explanations)
    if not explanations:
        raise ValueError("need at least one explanation")
    names = explanations[0].names
    P = np.array([e.phi for e in explanations])
    mean_abs = np.abs(P).mean(axis=0)
    order = sorted(range(len(names)), key=lambda j: (-mean_abs[j], j))
    grouped = len(names) != len(explanations[0].feature_values)
    points = {}
    for j in order:
        vals = [np.nan if grouped else float(e.feature_values[j]) for e in explanations]
        points[names[j]] = list(zip(P[:, j].tolist(), vals))
    sids = tuple(e.subject_id or str(i) for i, e in enumerate(explanations))
    return SummaryRanking(tuple(names[j] for j in order), mean_abs[order], points, sids)


@dataclass(frozen=True)
class WaterfallBar:
    feature: str
    value: float
    phi: float
    start: float
    end: float

    @property
    def increases_risk(self) -> bool:
        return self.phi > 0


@dataclass(frozen=True)
class Waterfall:
    base_value: float
    prediction: float
    bars: tuple

    @property
    def final(self) -> float:
        return self.bars[-1].end if self.bars else self.base_value


def waterfall_data(explanation: Explanation) -> Waterfall:
    """Contributions by decreasing magnitude, accumulated from the base value."""
    e = explanation
    names = e.names
    order = sorted(range(len(e.phi)), key=lambda j: (-abs(e.phi[j]), j))
    bars, running = [], e.base_value
    grouped = len(names) != len(e.feature_values)
    for j in order:
        start, running = running, running + float(e.phi[j])
        value = np.nan if grouped else float(e.feature_values[j])
        bars.append(WaterfallBar(names[j], value, float(e.phi[j]), start, running))
    return Waterfall(e.base_value, e.prediction, tuple(bars))


def explanations_to_json(explanations) -> str:
    return json.dumps([e.to_dict() for e in explanations], indent=2)
