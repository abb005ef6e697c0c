"""Configuration-driven end-to-end workflow.

split -> forward selection (optional) -> tuning -> final fit -> evaluation
-> explanation -> importance comparison. External cohorts enter only at
evaluation and explanation, after the model artifact has been written.
"""
from __future__ import annotations

import copy
import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import aspects as _aspects
from .dataset import (
    CohortConfig,
    FeatureSet,
    PreprocessParams,
    TabularDataset,
    apply_preprocess,
    engineer_roi_features,
    fit_preprocess,
    generate_synthetic,
    load_csv,
    load_schema,
    select_feature_set,
    stratified_repeated_kfold,
    stratified_split,
)
from .errors import ConfigError, StageError, UnsupportedOperationError
from .explain import explain_dataset, summary_ranking
from .importance import Ranking, permutation_importance, ranking_correlation_matrix
from .metrics import score_report
from .report import emit_reports
from .models import ModelKind, TrainedModel, default_params, log_odds, model_from_dict, natural_importance, train
from .selection import SelectionResult, apply_selection, forward_select
from .tuning import TuneTrace, cv_objective, tune

log = logging.getLogger(__name__)

BUNDLE_FORMAT = "cohortxai-bundle"
BUNDLE_VERSION = 1


# -- configuration -----------------------------------------------------------


def default_config() -> dict:
    """Every setting with its default; ``config --print-defaults`` prints this."""
    return {
        "train": {"synthetic": CohortConfig(informative={0: 1.0, 1: 0.8}, cognitive_effect=1.5).to_dict(),
                  "seed": 0},
        "external": [],
        "task": None,
        "engineer": True,
        "feature_set": "FS3",
        "model": "rforest",
        "selection": {"enabled": False, "model": None, "params": None},
        "test_fraction": 0.2,
        "tuning": {"init": 10, "iters": 25, "folds": 10, "repeats": 10, "params": None},
        "explain": {"cohorts": ["test"], "n_samples": 2048, "background_size": 50,
                    "max_subjects": 50, "waterfall_subjects": []},
        "importance": {"metric": "accuracy", "n_repeats": 10, "aspect_threshold": 0.5},
        "seeds": {"split": 0, "selection": 0, "tuning": 0, "model": 0, "explain": 0, "importance": 0},
        "threads": 1,
        "out": "run",
    }


def _merge(base: dict, override: dict, path="") -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if k not in base:
            raise ConfigError(f"unknown setting {path + k!r}")
        if isinstance(base[k], dict) and isinstance(v, dict) and k not in ("train", "params", "synthetic"):
            out[k] = _merge(base[k], v, f"{path}{k}.")
        else:
            out[k] = copy.deepcopy(v)
    return out


def _check_source(src, where, base_dir):
    if not isinstance(src, dict):
        raise ConfigError(f"{where}: expected an object")
    if "synthetic" in src:
        if "seed" not in src or not isinstance(src["seed"], int):
            raise ConfigError(f"{where}: a synthetic source needs an explicit integer seed")
        CohortConfig.from_dict(src["synthetic"])
        return
    if "csv" not in src or "schema" not in src:
        raise ConfigError(f"{where}: give either 'synthetic' + 'seed' or 'csv' + 'schema'")
    for key in ("csv", "schema"):
        p = Path(src[key])
        if not p.is_absolute():
            p = base_dir / p
        if not p.is_file():
            raise ConfigError(f"{where}.{key}: file not found: {p}")


@dataclass(frozen=True)
class PipelineConfig:
    data: dict
    base_dir: Path = Path(".")

    @classmethod
    def from_dict(cls, d: dict, base_dir=".") -> "PipelineConfig":
        cfg = cls(_merge(default_config(), d), Path(base_dir))
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "PipelineConfig":
        path = Path(path)
        try:
            d = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(d, path.parent)

    def __getitem__(self, key):
        return self.data[key]

    def validate(self):
        """Check every setting and every referenced file before any work."""
        d = self.data
        _check_source(d["train"], "train", self.base_dir)
        if not isinstance(d["external"], list):
            raise ConfigError("external: expected a list")
        names = set()
        for i, ext in enumerate(d["external"]):
            if not isinstance(ext, dict) or "name" not in ext:
                raise ConfigError(f"external[{i}]: needs a 'name'")
            if ext["name"] in names or ext["name"] in ("train", "test"):
                raise ConfigError(f"external[{i}]: duplicate or reserved name {ext['name']!r}")
            names.add(ext["name"])
            _check_source({k: v for k, v in ext.items() if k != "name"}, f"external[{i}]", self.base_dir)
        FeatureSet.parse(d["feature_set"])
        ModelKind.parse(d["model"])
        if d["selection"]["model"] is not None:
            ModelKind.parse(d["selection"]["model"])
        if not 0 < float(d["test_fraction"]) < 1:
            raise ConfigError("test_fraction must lie in (0, 1)")
        t = d["tuning"]
        for key in ("init", "iters"):
            if not isinstance(t[key], int) or t[key] < 0:
                raise ConfigError(f"tuning.{key} must be a non-negative integer")
        if 0 < t["init"] < 2:
            raise ConfigError("tuning.init must be 0 or at least 2")
        if t["iters"] and not t["init"]:
            raise ConfigError("tuning.iters needs tuning.init >= 2")
        for key in ("folds", "repeats"):
            if not isinstance(t[key], int) or t[key] < (2 if key == "folds" else 1):
                raise ConfigError(f"tuning.{key} is too small")
        for key, v in d["seeds"].items():
            if not isinstance(v, int):
                raise ConfigError(f"seeds.{key} must be an explicit integer")
        unknown = set(d["explain"]["cohorts"]) - names - {"train", "test"}
        if unknown:
            raise ConfigError(f"explain.cohorts: unknown cohorts {sorted(unknown)}")
        if not 0 < float(d["importance"]["aspect_threshold"]) <= 1:
            raise ConfigError("importance.aspect_threshold must lie in (0, 1]")
        if not isinstance(d["threads"], int) or d["threads"] < 1:
            raise ConfigError("threads must be a positive integer")
        if d["task"] is not None and (not isinstance(d["task"], list) or len(d["task"]) != 2):
            raise ConfigError("task must be a pair of class names or null")

    @property
    def out(self) -> Path:
        p = Path(self.data["out"])
        return p if p.is_absolute() else self.base_dir / p


# -- model bundle ------------------------------------------------------------


@dataclass(frozen=True)
class ModelBundle:
    """A fitted model with the preprocessing fitted on the same rows."""

    model: TrainedModel
    preprocess: PreprocessParams

    @property
    def feature_names(self) -> list[str]:
        return list(self.model.feature_names)

    def transform(self, ds: TabularDataset) -> TabularDataset:
        return apply_preprocess(self.preprocess, ds.align_columns(self.feature_names))

    def predict_proba(self, ds: TabularDataset) -> np.ndarray:
        return self.model.predict_proba(self.transform(ds).values)

    def to_dict(self) -> dict:
        return {"format": BUNDLE_FORMAT, "version": BUNDLE_VERSION, "model": self.model.to_dict(),
                "preprocess": self.preprocess.to_dict()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d) -> "ModelBundle":
        if d.get("format") != BUNDLE_FORMAT:
            return cls(model_from_dict(d), PreprocessParams(
                np.zeros(len(d["feature_names"])), np.ones(len(d["feature_names"])),
                np.zeros(len(d["feature_names"])), tuple(d["feature_names"])))
        return cls(model_from_dict(d["model"]), PreprocessParams.from_dict(d["preprocess"]))

    @classmethod
    def read(cls, path) -> "ModelBundle":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def fit_bundle(kind, params, ds: TabularDataset, seed=0) -> ModelBundle:
    pre = fit_preprocess(ds)
    X = apply_preprocess(pre, ds.values)
    model = train(kind, params, X, ds.labels, seed=seed, feature_names=ds.feature_names)
    return ModelBundle(model, pre)


# -- run ---------------------------------------------------------------------


@dataclass
class RunReport:
    cv_mean: float | None
    cv_std: float | None
    best_params: dict
    scores: dict
    selection: dict | None
    rankings: dict
    kendall: dict
    aspects: list
    artifacts: dict
    config_digest: str

    def to_dict(self) -> dict:
        return dict(self.__dict__)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_json_default)

    @classmethod
    def read(cls, path) -> "RunReport":
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o).__name__}")


def load_source(src: dict, base_dir=Path(".")) -> TabularDataset:
    if "synthetic" in src:
        return generate_synthetic(CohortConfig.from_dict(src["synthetic"]), src["seed"])
    resolve = lambda p: Path(p) if Path(p).is_absolute() else Path(base_dir) / p  # noqa: E731
    return load_csv(resolve(src["csv"]), load_schema(resolve(src["schema"])))


def prepare(ds: TabularDataset, cfg: PipelineConfig) -> TabularDataset:
    if cfg["engineer"]:
        ds = engineer_roi_features(ds)
    return select_feature_set(ds, cfg["feature_set"])


class _Stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        log.info("stage %s", self.name)

    def __exit__(self, et, exc, tb):
        if exc is not None and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _digest(cfg: PipelineConfig) -> str:
    d = dict(cfg.data)
    d.pop("threads", None)
    d.pop("out", None)
    return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


def run_pipeline(cfg: PipelineConfig | dict) -> RunReport:
    """Execute the full workflow and persist every artifact under ``cfg.out``."""
    if isinstance(cfg, dict):
        cfg = PipelineConfig.from_dict(cfg)
    out = cfg.out
    out.mkdir(parents=True, exist_ok=True)
    seeds, threads = cfg["seeds"], cfg["threads"]
    kind = ModelKind.parse(cfg["model"])
    artifacts = {}
    _write(out / "config.json", json.dumps(cfg.data, indent=2, sort_keys=True))

    with _Stage("load"):
        cohort = prepare(load_source(cfg["train"], cfg.base_dir), cfg)
        if cfg["task"] is not None and tuple(cfg["task"]) != cohort.class_names:
            raise ConfigError(f"task {cfg['task']} does not match cohort classes {list(cohort.class_names)}")

    with _Stage("split"):
        split = stratified_split(cohort, cfg["test_fraction"], seeds["split"])
        train_ds, test_ds = cohort.take_rows(split.train), cohort.take_rows(split.test)
        _write(out / "split.json", json.dumps(split.to_dict(cohort), indent=2))
        artifacts["split"] = "split.json"

    selection = None
    if cfg["selection"]["enabled"]:
        with _Stage("selection"):
            sel_kind = cfg["selection"]["model"] or kind.value
            selection = forward_select(train_ds, sel_kind, seeds["selection"], cfg["selection"]["params"], threads)
            train_ds = apply_selection(train_ds, selection)
            test_ds = test_ds.take_columns(train_ds.feature_names)
            _write(out / "selection.json", selection.to_json())
            artifacts["selection"] = "selection.json"

    with _Stage("tune"):
        t = cfg["tuning"]
        fixed = dict(default_params(kind, len(train_ds.feature_names)))
        fixed.update(t["params"] or {})
        cv_mean = cv_std = None
        if t["init"] + t["iters"] > 0:
            plan = stratified_repeated_kfold(train_ds, t["folds"], t["repeats"], seeds["tuning"])
            trace = tune(kind, train_ds, None, t["init"], t["iters"], seeds["tuning"], fold_plan=plan,
                         threads=threads)
            trace.write(out / "tune_trace.jsonl")
            artifacts["tune_trace"] = "tune_trace.jsonl"
            best = trace.best
            fixed.update(best.params)
            cv_mean, cv_std = best.mean, best.std
        else:
            plan = stratified_repeated_kfold(train_ds, t["folds"], t["repeats"], seeds["tuning"])
            cv_mean, cv_std, _ = cv_objective(kind, fixed, train_ds, plan, seeds["tuning"], threads)

    with _Stage("train"):
        bundle = fit_bundle(kind, fixed, train_ds, seeds["model"])
        _write(out / "model.json", bundle.to_json())
        artifacts["model"] = "model.json"

    with _Stage("evaluate"):
        cohorts = {"train": train_ds, "test": test_ds}
        for ext in cfg["external"]:
            src = {k: v for k, v in ext.items() if k != "name"}
            cohorts[ext["name"]] = prepare(load_source(src, cfg.base_dir), cfg)
        scores, pred_rows = {}, ["cohort,subject_id,label,proba"]
        for name, ds in cohorts.items():
            proba = bundle.predict_proba(ds)
            scores[name] = score_report(ds.labels, proba).to_dict()
            pred_rows += [f"{name},{s},{y},{p!r}" for s, y, p in zip(ds.subject_ids, ds.labels, proba.tolist())]
        _write(out / "predictions.csv", "\n".join(pred_rows) + "\n")
        artifacts["predictions"] = "predictions.csv"

    with _Stage("explain"):
        e = cfg["explain"]
        Xtr = bundle.transform(train_ds)
        rng = np.random.default_rng(seeds["explain"])
        nb = min(e["background_size"], train_ds.n_subjects)
        background = Xtr.values[np.sort(rng.choice(train_ds.n_subjects, nb, replace=False))]
        explanations = {}
        for name in e["cohorts"]:
            view = bundle.transform(cohorts[name])
            view = view.take_rows(np.arange(min(e["max_subjects"], view.n_subjects)))
            explanations[name] = explain_dataset(bundle.model, background, view, e["n_samples"], seeds["explain"],
                                                 threads=threads)
        doc = {name: [x.to_dict() for x in ex] for name, ex in explanations.items()}
        _write(out / "explanations.json", json.dumps(doc, sort_keys=True, default=_json_default))
        artifacts["explanations"] = "explanations.json"

    with _Stage("importance"):
        imp = cfg["importance"]
        names = train_ds.feature_names
        rankings = []
        shap_source = next(iter(explanations.values()), [])
        if shap_source:
            s = summary_ranking(shap_source)
            rankings.append(Ranking("shap", s.features, s.mean_abs))
        Xte = bundle.transform(test_ds)
        perm = permutation_importance(bundle.model, Xte.values, Xte.labels, imp["metric"], imp["n_repeats"],
                                      seeds["importance"], names)
        rankings.append(perm.ranking("permutation"))
        try:
            rankings.append(Ranking.from_scores("natural", names, natural_importance(bundle.model)))
        except UnsupportedOperationError:
            if kind is ModelKind.LOGREG:
                lo = log_odds(bundle.model)
                rankings.append(Ranking.from_scores("log_odds", names, np.abs(np.log(lo.odds_ratio))))
        rho = _aspects.spearman_matrix(Xtr.values)
        partition = _aspects.cut_aspects(_aspects.build_dendrogram(rho, names), imp["aspect_threshold"])
        aperm = _aspects.aspect_permutation_importance(bundle.model, Xte.values, Xte.labels, partition,
                                                       imp["metric"], imp["n_repeats"], seeds["importance"])
        _write(out / "aspects.json", partition.to_json())
        _write(out / "rankings.json", json.dumps(
            {"rankings": [r.to_dict() for r in rankings], "aspect_permutation": aperm.to_dict()},
            indent=2, sort_keys=True))
        artifacts["aspects"] = "aspects.json"
        artifacts["rankings"] = "rankings.json"
        kendall = {}
        if len(rankings) >= 2:
            M = ranking_correlation_matrix(rankings)
            kendall = {"labels": list(M.labels), "tau": [[None if np.isnan(v) else float(v) for v in row]
                                                          for row in M.values]}

    report = RunReport(
        cv_mean=cv_mean,
        cv_std=cv_std,
        best_params=dict(bundle.model.params),
        scores=scores,
        selection=None if selection is None else selection.to_dict(),
        rankings={r.method: r.top(10) for r in rankings},
        kendall=kendall,
        aspects=partition.to_list(),
        artifacts=artifacts,
        config_digest=_digest(cfg),
    )
    _write(out / "report.json", report.to_json())
    with _Stage("report"):
        emit_reports(out, waterfall_subjects=cfg["explain"]["waterfall_subjects"])
    return report


def load_selection(path) -> SelectionResult:
    return SelectionResult.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def load_trace(path) -> TuneTrace:
    return TuneTrace.read(path)
