"""Bayesian hyperparameter optimisation.

Configurations live in the unit cube (one coordinate per hyperparameter).
A Latin hypercube seeds the search; a Matern-5/2 Gaussian process fitted to
the CV error ``1 - accuracy`` then proposes the candidate minimising the
lower confidence bound ``mu - sigma``.
"""
from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .dataset import FoldPlan, TabularDataset, apply_preprocess, fit_preprocess, stratified_repeated_kfold
from .models import ModelKind, ParamDomain, param_space, train

log = logging.getLogger(__name__)

N_CANDIDATES = 1024
LENGTH_GRID = tuple(np.logspace(np.log10(0.05), np.log10(3.0), 7))
NOISE_GRID = (1e-6, 1e-4, 1e-2, 1e-1)
JITTER = 1e-8

__all__ = [
    "ParamDomain",
    "encode",
    "decode",
    "lhd_unit",
    "lhd_init",
    "GPSurrogate",
    "gp_fit",
    "gp_predict",
    "acquisition_lcb",
    "propose_next",
    "cv_objective",
    "TuneTrace",
    "bayes_optimize",
    "tune",
]


def encode(space, record: dict) -> np.ndarray:
    return np.array([d.encode(record[d.name]) for d in space])


def decode(space, u) -> dict:
    return {d.name: d.decode(v) for d, v in zip(space, u)}


def lhd_unit(n_dims: int, n: int, rng) -> np.ndarray:
    """``n`` points in ``[0,1]^d`` with exactly one point per ``1/n``-interval
    in every dimension; dimensions are matched by independent permutations."""
    cells = np.column_stack([rng.permutation(n) for _ in range(n_dims)]) if n_dims else np.empty((n, 0))
    return (cells + rng.random((n, n_dims))) / n


def lhd_init(space, n: int, seed, return_unit: bool = False):
    space = list(space)
    if not space:
        raise ValueError("empty hyperparameter space")
    if n < 2:
        raise ValueError("need n >= 2 design points")
    rng = np.random.default_rng(seed)
    U = lhd_unit(len(space), n, rng)
    records = [decode(space, u) for u in U]
    return (records, U) if return_unit else records


# -- Gaussian process --------------------------------------------------------


def matern52(A, B, length):
    r = np.sqrt(np.maximum(((A[:, None, :] - B[None, :, :]) ** 2).sum(-1), 0.0)) / length
    s5 = math.sqrt(5.0) * r
    return (1.0 + s5 + 5.0 / 3.0 * r * r) * np.exp(-s5)


@dataclass
class GPSurrogate:
    X: np.ndarray
    y: np.ndarray
    mean: float
    amplitude: float
    length: float
    noise: float
    chol: tuple
    alpha: np.ndarray
    lml: float
    fit_trace: list = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.X.shape[1]


def _lml(Kc, yc, noise):
    """Profile log marginal likelihood with the amplitude in closed form."""
    n = len(yc)
    K = Kc + (noise + JITTER) * np.eye(n)
    try:
        c = cho_factor(K, lower=True)
    except np.linalg.LinAlgError:
        return -np.inf, None, None, None
    a = cho_solve(c, yc)
    amp = max(float(yc @ a) / n, 1e-12)
    logdet = 2.0 * np.sum(np.log(np.diag(c[0])))
    lml = -0.5 * n * (1.0 + math.log(2 * math.pi * amp)) - 0.5 * logdet
    return lml, amp, c, a


def gp_fit(X, y, length_grid=LENGTH_GRID, noise_grid=NOISE_GRID) -> GPSurrogate:
    """Mean-centred Matern-5/2 GP; length scale and noise-to-signal ratio
    by grid search over the log marginal likelihood."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if len(X) < 2:
        raise ValueError("need at least two observations")
    if len(X) != len(y):
        raise ValueError("X and y lengths differ")
    mean = float(y.mean())
    yc = y - mean
    best = None
    trace = []
    for length in length_grid:
        Kc = matern52(X, X, length)
        for noise in noise_grid:
            lml, amp, c, a = _lml(Kc, yc, noise)
            trace.append((float(length), float(noise), float(lml)))
            if c is not None and (best is None or lml > best[0]):
                best = (lml, length, noise, amp, c, a)
    if best is None:
        raise np.linalg.LinAlgError("no grid point gave a positive definite covariance")
    lml, length, noise, amp, c, a = best
    return GPSurrogate(X, y, mean, amp, float(length), float(noise), c, a, float(lml), trace)


def gp_predict(gp: GPSurrogate, x):
    """Posterior mean and standard deviation of the latent objective."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    Xs = np.atleast_2d(x)
    if Xs.shape[1] != gp.dim:
        raise ValueError(f"expected {gp.dim}-dimensional input, got {Xs.shape[1]}")
    k = matern52(Xs, gp.X, gp.length)
    mu = gp.mean + k @ gp.alpha
    v = cho_solve(gp.chol, k.T)
    var = gp.amplitude * np.maximum(1.0 - np.sum(k.T * v, axis=0), 0.0)
    sd = np.sqrt(var)
    return (float(mu[0]), float(sd[0])) if single else (mu, sd)


def acquisition_lcb(mu, sigma):
    return np.asarray(mu) - np.asarray(sigma) if np.ndim(mu) else float(mu) - float(sigma)


def propose_next(gp: GPSurrogate, space, seed, evaluated=None) -> dict:
    """Best of 1024 uniform candidates under the LCB, never a configuration
    already evaluated (compared after snapping to the domains' grid)."""
    space = list(space)
    rng = np.random.default_rng(seed)
    U = rng.random((N_CANDIDATES, len(space)))
    records = [decode(space, u) for u in U]
    E = np.array([encode(space, r) for r in records])
    seen = gp.X if evaluated is None else np.atleast_2d(np.asarray(evaluated, dtype=float))
    if len(seen):
        dist = np.abs(E[:, None, :] - seen[None, :, :]).max(axis=2).min(axis=1)
        ok = dist > 1e-9
    else:
        ok = np.ones(len(E), bool)
    if not ok.any():
        log.warning("every candidate was already evaluated; returning a random configuration")
        return records[0]
    mu, sd = gp_predict(gp, E[ok])
    score = acquisition_lcb(mu, sd)
    return records[int(np.flatnonzero(ok)[int(np.argmin(score))])]


# -- objective ---------------------------------------------------------------


def _xy(ds):
    if isinstance(ds, TabularDataset):
        return ds.values, ds.labels, ds.feature_names
    X, y = ds
    X = np.asarray(X, dtype=float)
    return X, np.asarray(y, dtype=int), [f"x{j}" for j in range(X.shape[1])]


def _fold_score(kind, params, X, y, names, tr, va, seed):
    pre = fit_preprocess(X[tr])
    Xtr, Xva = apply_preprocess(pre, X[tr]), apply_preprocess(pre, X[va])
    try:
        model = train(kind, params, Xtr, y[tr], seed=seed, feature_names=names)
        return float(np.mean(model.predict(Xva) == y[va]))
    except Exception as exc:  # scored as the majority-class rate
        log.warning("fold training failed (%s); scoring class-prior accuracy", exc)
        majority = int(np.mean(y[tr]) >= 0.5)
        return float(np.mean(y[va] == majority))


def cv_objective(kind, params, ds, fold_plan: FoldPlan, seed=0, threads=1):
    """Mean and sample standard deviation of fold accuracies, plus the scores.

    Preprocessing is refitted on each fold's training rows.
    """
    X, y, names = _xy(ds)
    splits = list(fold_plan.splits())
    jobs = [(tr, va, int(np.random.default_rng([seed, i]).integers(2**31))) for i, (tr, va) in enumerate(splits)]

    def run(job):
        tr, va, s = job
        return _fold_score(kind, params, X, y, names, tr, va, s)

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            scores = np.array(list(pool.map(run, jobs)))
    else:
        scores = np.array([run(j) for j in jobs])
    std = float(scores.std(ddof=1)) if len(scores) > 1 else 0.0
    return float(scores.mean()), std, scores


# -- the optimisation loop ---------------------------------------------------


@dataclass
class TraceEntry:
    params: dict
    mean: float
    std: float
    source: str = "bo"

    def to_dict(self) -> dict:
        return {"params": self.params, "mean": self.mean, "std": self.std, "source": self.source}


@dataclass
class TuneTrace:
    entries: list
    space: list = field(default_factory=list)

    @property
    def best_index(self) -> int:
        return min(range(len(self.entries)), key=lambda i: (-self.entries[i].mean, self.entries[i].std, i))

    @property
    def best(self) -> TraceEntry:
        return self.entries[self.best_index]

    @property
    def means(self) -> np.ndarray:
        return np.array([e.mean for e in self.entries])

    def __len__(self):
        return len(self.entries)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e.to_dict(), sort_keys=True) + "\n" for e in self.entries)

    def write(self, path):
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")

    @classmethod
    def read(cls, path, space=()) -> "TuneTrace":
        entries = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if line.strip():
                d = json.loads(line)
                entries.append(TraceEntry(d["params"], d["mean"], d["std"], d.get("source", "bo")))
        return cls(entries, list(space))


def bayes_optimize(objective, space, init=10, iters=25, seed=0, resume: TuneTrace | None = None,
                   on_entry=None) -> TuneTrace:
    """Maximise ``objective(params) -> (mean, std)``.

    Design points and proposals draw from streams keyed by (seed, step), so
    a run resumed from a partial trace repeats the uninterrupted run.
    """
    space = list(space)
    entries = list(resume.entries) if resume is not None else []
    design = lhd_init(space, init, [seed, 0]) if init >= 2 else [decode(space, np.full(len(space), 0.5))] * init
    total = init + iters
    for step in range(len(entries), total):
        if step < init:
            params, source = design[step], "lhd"
        else:
            X = np.array([encode(space, e.params) for e in entries])
            y = np.array([1.0 - e.mean for e in entries])
            gp = gp_fit(X, y)
            params, source = propose_next(gp, space, [seed, 1, step]), "bo"
        mean, std = objective(params)[:2]
        entries.append(TraceEntry(params, float(mean), float(std), source))
        if on_entry is not None:
            on_entry(entries[-1])
    return TuneTrace(entries, space)


def tune(kind, ds, space=None, init=10, iters=25, seed=0, fold_plan=None, k=10, repeats=10,
         threads=1, resume=None, on_entry=None) -> TuneTrace:
    """Tune ``kind`` on ``ds`` by stratified repeated k-fold CV accuracy."""
    kind = ModelKind.parse(kind)
    X, y, names = _xy(ds)
    if space is None:
        space = param_space(kind, X.shape[1])
    if fold_plan is None:
        fold_plan = stratified_repeated_kfold(y, k, repeats, seed)

    def objective(params):
        mean, std, _ = cv_objective(kind, params, ds, fold_plan, seed, threads)
        return mean, std

    return bayes_optimize(objective, space, init, iters, seed, resume, on_entry)
