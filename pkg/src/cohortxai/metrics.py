"""Classification scores, ROC area and the rank-based significance tests."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from itertools import combinations

import numpy as np
from scipy import stats

from .errors import UndefinedScoreError

SCORE_CSV_FIELDS = ("ACC", "BACC", "AUROC", "F1", "MCC")


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with class 1 as the patient (positive) class."""

    TP: int
    FP: int
    FN: int
    TN: int

    @property
    def total(self) -> int:
        return self.TP + self.FP + self.FN + self.TN


def confusion(y_true, y_pred) -> ConfusionMatrix:
    t = np.asarray(y_true).astype(int)
    p = np.asarray(y_pred).astype(int)
    if t.shape != p.shape:
        raise ValueError(f"length mismatch: {t.shape[0]} labels vs {p.shape[0]} predictions")
    return ConfusionMatrix(
        TP=int(np.sum((t == 1) & (p == 1))),
        FP=int(np.sum((t == 0) & (p == 1))),
        FN=int(np.sum((t == 1) & (p == 0))),
        TN=int(np.sum((t == 0) & (p == 0))),
    )


def _ratio(a, b) -> float:
    return a / b if b else 0.0


def classification_scores(cm: ConfusionMatrix) -> tuple[float, float, float, float]:
    """(acc, bacc, f1_macro, mcc); undefined ratios count as 0."""
    TP, FP, FN, TN = cm.TP, cm.FP, cm.FN, cm.TN
    if cm.total <= 0:
        raise ValueError("empty confusion matrix")
    acc = (TP + TN) / cm.total
    bacc = (_ratio(TP, TP + FN) + _ratio(TN, TN + FP)) / 2
    f1_pos = _ratio(TP, TP + 0.5 * (FP + FN))
    f1_neg = _ratio(TN, TN + 0.5 * (FN + FP))
    f1 = (f1_pos + f1_neg) / 2
    den = (TP + FP) * (TP + FN) * (TN + FP) * (TN + FN)
    mcc = (TP * TN - FP * FN) / math.sqrt(den) if den else 0.0
    return acc, bacc, f1, mcc


def auroc(y_true, scores) -> float:
    """Area under the ROC curve as the midrank Mann-Whitney statistic."""
    y = np.asarray(y_true).astype(int)
    s = np.asarray(scores, dtype=float)
    n1 = int(np.sum(y == 1))
    n0 = len(y) - n1
    if n1 == 0 or n0 == 0:
        raise UndefinedScoreError("AUROC needs both classes present")
    ranks = stats.rankdata(s)
    u = ranks[y == 1].sum() - n1 * (n1 + 1) / 2
    return float(u / (n1 * n0))


def no_information_rate(y_true) -> float:
    y = np.asarray(y_true).astype(int)
    if len(y) == 0:
        raise ValueError("empty label vector")
    p = y.mean()
    return float(max(p, 1 - p))


@dataclass(frozen=True)
class ScoreReport:
    acc: float
    bacc: float
    f1_macro: float
    mcc: float
    auroc: float
    no_information_rate: float
    n: int = 0

    def to_dict(self) -> dict:
        return asdict(self)

    def csv_row(self) -> list[float]:
        return [self.acc, self.bacc, self.auroc, self.f1_macro, self.mcc]


def score_report(y_true, proba, threshold: float = 0.5) -> ScoreReport:
    y = np.asarray(y_true).astype(int)
    proba = np.asarray(proba, dtype=float)
    cm = confusion(y, (proba >= threshold).astype(int))
    acc, bacc, f1, mcc = classification_scores(cm)
    try:
        auc = auroc(y, proba)
    except UndefinedScoreError:
        auc = float("nan")
    return ScoreReport(acc, bacc, f1, mcc, auc, no_information_rate(y), len(y))


# -- significance tests ------------------------------------------------------


def friedman_test(results) -> tuple[float, float]:
    """Friedman chi-square over treatments (columns), blocks are rows.

    Within-row midranks, tie-corrected statistic, chi-square tail with
    k - 1 degrees of freedom.
    """
    R = np.asarray(results, dtype=float)
    if R.ndim != 2 or R.shape[0] < 2 or R.shape[1] < 2:
        raise ValueError("need at least 2 rows and 2 treatments")
    n, k = R.shape
    ranks = np.apply_along_axis(stats.rankdata, 1, R)
    rank_sums = ranks.sum(axis=0)
    stat = 12.0 / (n * k * (k + 1)) * np.sum(rank_sums**2) - 3.0 * n * (k + 1)
    ties = 0.0
    for row in R:
        _, counts = np.unique(row, return_counts=True)
        ties += np.sum(counts**3 - counts)
    denom = 1.0 - ties / (n * (k**3 - k))
    if denom <= 0:
        return 0.0, 1.0
    stat = max(stat / denom, 0.0)
    return float(stat), float(stats.chi2.sf(stat, k - 1))


EXACT_LIMIT = 20


def _signed_rank_parts(diffs):
    d = np.asarray(diffs, dtype=float)
    d = d[d != 0]
    ranks = stats.rankdata(np.abs(d))
    return d, ranks


def wilcoxon_signed_rank(diffs) -> tuple[float, float]:
    """Two-sided Wilcoxon signed-rank test on paired differences.

    Zero differences are dropped. Up to 20 nonzero differences the null
    distribution of the positive rank sum is enumerated exactly (midranks
    allowed); beyond that a tie-corrected normal approximation with
    continuity correction is used. Returns (W+, p).
    """
    d, ranks = _signed_rank_parts(diffs)
    n = len(d)
    if n == 0:
        return 0.0, 1.0
    w_plus = float(ranks[d > 0].sum())
    if n <= EXACT_LIMIT:
        doubled = np.rint(2 * ranks).astype(int)
        total = int(doubled.sum())
        dist = np.zeros(total + 1)
        dist[0] = 1.0
        for r in doubled:
            shifted = np.zeros_like(dist)
            shifted[r:] = dist[: total + 1 - r]
            dist = dist + shifted
        dist /= dist.sum()
        w2 = int(round(2 * w_plus))
        lower = dist[: w2 + 1].sum()
        upper = dist[w2:].sum()
        return w_plus, float(min(1.0, 2 * min(lower, upper)))
    mean = n * (n + 1) / 4
    _, counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24 - np.sum(counts**3 - counts) / 48
    if var <= 0:
        return w_plus, 1.0
    z = (abs(w_plus - mean) - 0.5) / math.sqrt(var)
    return w_plus, float(min(1.0, 2 * stats.norm.sf(max(z, 0.0))))


@dataclass(frozen=True)
class PairwiseResult:
    name_a: str
    name_b: str
    statistic: float
    p: float
    p_adjusted: float
    n_nonzero: int


def wilcoxon_bonferroni(pairs, m: int | None = None) -> list[PairwiseResult]:
    """Paired Wilcoxon tests with Bonferroni adjustment ``min(1, m p)``.

    ``pairs`` holds ``(name_a, name_b, samples)`` where samples are either
    the paired differences or a ``(a_values, b_values)`` pair.
    """
    pairs = list(pairs)
    if m is None:
        m = len(pairs)
    out = []
    for name_a, name_b, samples in pairs:
        if isinstance(samples, tuple) and len(samples) == 2:
            a, b = (np.asarray(s, dtype=float) for s in samples)
            if a.shape != b.shape:
                raise ValueError(f"{name_a} vs {name_b}: unpaired sample lengths")
            diffs = a - b
        else:
            diffs = np.asarray(samples, dtype=float)
        if diffs.size == 0:
            raise ValueError(f"{name_a} vs {name_b}: empty samples")
        w, p = wilcoxon_signed_rank(diffs)
        out.append(PairwiseResult(name_a, name_b, w, p, min(1.0, m * p), int(np.sum(diffs != 0))))
    return out


def pairwise_wilcoxon(columns: dict) -> list[PairwiseResult]:
    """All pairwise comparisons between named paired samples."""
    names = list(columns)
    pairs = [(a, b, (columns[a], columns[b])) for a, b in combinations(names, 2)]
    return wilcoxon_bonferroni(pairs)
