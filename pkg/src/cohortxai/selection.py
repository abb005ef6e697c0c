"""Greedy forward selection of MRI features."""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dataset import TabularDataset, apply_preprocess, fit_preprocess, stratified_split
from .errors import SchemaError
from .models import ModelKind, default_params, train

log = logging.getLogger(__name__)

VALIDATION_FRACTION = 0.2


@dataclass(frozen=True)
class SelectionResult:
    selected: tuple
    accuracies: tuple
    kind: str
    seed: int

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "steps": [{"feature": f, "accuracy": a} for f, a in zip(self.selected, self.accuracies)],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d) -> "SelectionResult":
        steps = d["steps"]
        return cls(tuple(s["feature"] for s in steps), tuple(s["accuracy"] for s in steps), d["kind"], d["seed"])


def forward_select(ds: TabularDataset, kind, seed: int = 0, params: dict | None = None,
                   threads: int = 1) -> SelectionResult:
    """Add MRI features one at a time while validation accuracy strictly improves.

    The cohort is split 80/20 within each class; preprocessing is fitted on
    the 80 %. Each round trains the model on ``selected + [candidate]`` for
    every remaining candidate and keeps the best one (lowest column index on
    ties). A candidate whose training fails scores 0 for that round.
    """
    kind = ModelKind.parse(kind)
    mri = ds.mri_names()
    if not mri:
        raise SchemaError("forward selection needs at least one MRI column")
    split = stratified_split(ds, VALIDATION_FRACTION, seed)
    sub = ds.take_columns(mri)
    pre = fit_preprocess(sub.take_rows(split.train))
    Xtr = apply_preprocess(pre, sub.values[split.train])
    Xva = apply_preprocess(pre, sub.values[split.test])
    ytr, yva = ds.labels[split.train], ds.labels[split.test]

    def score(cols):
        p = dict(default_params(kind, len(cols)))
        p.update(params or {})
        if "max_features" in p:
            p["max_features"] = min(p["max_features"], len(cols))
        try:
            model = train(kind, p, Xtr[:, cols], ytr, seed=seed)
        except Exception as exc:
            log.warning("candidate %s failed to train (%s); scored 0", mri[cols[-1]], exc)
            return 0.0
        return float(np.mean(model.predict(Xva[:, cols]) == yva))

    selected: list[int] = []
    accs: list[float] = []
    best_acc = -np.inf
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        while len(selected) < len(mri):
            candidates = [j for j in range(len(mri)) if j not in selected]
            sets = [selected + [j] for j in candidates]
            scores = list(pool.map(score, sets)) if pool else [score(s) for s in sets]
            i = int(np.argmax(scores))  # first maximum = lowest column index
            if not scores[i] > best_acc:
                break
            best_acc = scores[i]
            selected.append(candidates[i])
            accs.append(best_acc)
    finally:
        if pool:
            pool.shutdown()
    return SelectionResult(tuple(mri[j] for j in selected), tuple(accs), kind.value, seed)


def apply_selection(ds: TabularDataset, result: SelectionResult) -> TabularDataset:
    """Keep the selected MRI columns plus every non-MRI column, in original order."""
    keep = set(result.selected)
    names = [c.name for c in ds.columns if not c.is_mri or c.name in keep]
    return ds.take_columns(names)
