"""Command-line entry point (``cohortxai``).

Exit codes: 0 success, 2 invalid configuration, 3 data error, 4 numeric
failure, 1 anything else.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import aspects as _aspects
from . import pipeline as _pipeline
from .dataset import (
    CohortConfig,
    engineer_roi_features,
    generate_synthetic,
    load_csv,
    load_schema,
    select_feature_set,
    stratified_repeated_kfold,
    write_csv,
)
from .errors import (
    ColumnMismatchError,
    ConfigError,
    FormatVersionError,
    IntegrityError,
    ParseError,
    RankDeficiencyError,
    SchemaError,
    StageError,
    TrainingError,
    UndefinedCorrelationError,
    UndefinedScoreError,
)
from .explain import explain_dataset, explanations_to_json, summary_ranking
from .importance import Ranking, ranking_correlation_matrix
from .metrics import friedman_test, pairwise_wilcoxon, score_report
from .models import ModelKind
from .report import emit_reports, scores_csv
from .selection import forward_select
from .tuning import TuneTrace, tune

log = logging.getLogger("cohortxai")

_DATA_ERRORS = (ParseError, SchemaError, IntegrityError, ColumnMismatchError, FormatVersionError, OSError)
_NUMERIC_ERRORS = (TrainingError, RankDeficiencyError, UndefinedScoreError, UndefinedCorrelationError,
                   np.linalg.LinAlgError, FloatingPointError)


def exit_code(exc: BaseException) -> int:
    while isinstance(exc, StageError):
        exc = exc.cause
    if isinstance(exc, ConfigError):
        return 2
    if isinstance(exc, _DATA_ERRORS):
        return 3
    if isinstance(exc, _NUMERIC_ERRORS):
        return 4
    return 1


def _read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def _out(args) -> Path:
    p = Path(args.out or ".")
    p.mkdir(parents=True, exist_ok=True)
    return p


def _dataset(args, data="data", schema="schema"):
    path, schema_path = getattr(args, data), getattr(args, schema)
    if path is None or schema_path is None:
        raise ConfigError(f"--{data.replace('_', '-')} and --{schema.replace('_', '-')} are required")
    ds = load_csv(path, load_schema(schema_path))
    if getattr(args, "engineer", False):
        ds = engineer_roi_features(ds)
    if getattr(args, "feature_set", None):
        ds = select_feature_set(ds, args.feature_set)
    return ds


# -- subcommands -------------------------------------------------------------


def cmd_synth(args):
    cfg = CohortConfig.from_dict(_read_json(args.config)) if args.config else CohortConfig()
    out = _out(args)
    write_csv(generate_synthetic(cfg, args.seed), out / "cohort.csv", out / "schema.json")
    print(out / "cohort.csv")


def cmd_engineer(args):
    out = _out(args)
    ds = engineer_roi_features(load_csv(args.data, load_schema(args.schema)))
    write_csv(ds, out / "engineered.csv", out / "engineered.schema.json")
    print(out / "engineered.csv")


def cmd_select(args):
    params = _read_json(args.params) if args.params else None
    result = forward_select(_dataset(args), args.model, args.seed, params, args.threads)
    (_out(args) / "selection.json").write_text(result.to_json(), encoding="utf-8")
    for f, a in zip(result.selected, result.accuracies):
        print(f"{f}\t{a:.4f}")


def cmd_tune(args):
    ds = _dataset(args)
    out = _out(args)
    path = out / "tune_trace.jsonl"
    resume = TuneTrace.read(args.resume) if args.resume else None
    if resume is not None and Path(args.resume).resolve() != path.resolve():
        resume.write(path)
    elif resume is None:
        path.write_text("", encoding="utf-8")

    def append(entry):
        with path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry.to_dict(), sort_keys=True) + "\n")

    plan = stratified_repeated_kfold(ds, args.folds, args.repeats, args.seed)
    trace = tune(args.model, ds, None, args.init, args.iters, args.seed, fold_plan=plan, threads=args.threads,
                 resume=resume, on_entry=append)
    best = trace.best
    print(json.dumps({"best_index": trace.best_index, "mean": best.mean, "std": best.std, "params": best.params}))


def cmd_train(args):
    ds = _dataset(args)
    params = {}
    if args.trace:
        params = TuneTrace.read(args.trace).best.params
    if args.params:
        params.update(_read_json(args.params))
    bundle = _pipeline.fit_bundle(args.model, params, ds, args.seed)
    (_out(args) / "model.json").write_text(bundle.to_json(), encoding="utf-8")
    print(_out(args) / "model.json")


def cmd_evaluate(args):
    bundle = _pipeline.ModelBundle.read(args.model)
    ds = _dataset(args)
    rep = score_report(ds.labels, bundle.predict_proba(ds))
    name = args.name or Path(args.data).stem
    text = scores_csv({name: rep.to_dict()})
    (_out(args) / "scores.csv").write_text(text, encoding="utf-8")
    sys.stdout.write(text)


def cmd_explain(args):
    bundle = _pipeline.ModelBundle.read(args.model)
    ds = bundle.transform(_dataset(args))
    bg_src = _dataset(args, "background", "background_schema") if args.background else None
    bg = bundle.transform(bg_src).values if bg_src is not None else ds.values
    rng = np.random.default_rng(args.seed)
    if len(bg) > args.background_size:
        bg = bg[np.sort(rng.choice(len(bg), args.background_size, replace=False))]
    if args.max_subjects is not None:
        ds = ds.take_rows(np.arange(min(args.max_subjects, ds.n_subjects)))
    ex = explain_dataset(bundle.model, bg, ds, args.n_samples, args.seed, threads=args.threads)
    out = _out(args)
    (out / "explanations.json").write_text(explanations_to_json(ex), encoding="utf-8")
    s = summary_ranking(ex)
    (out / "shap_summary.csv").write_text(s.to_csv(), encoding="utf-8")
    for f in s.top(10):
        print(f)


def cmd_aspects(args):
    ds = _dataset(args)
    rho = _aspects.spearman_matrix(ds.values)
    part = _aspects.cut_aspects(_aspects.build_dendrogram(rho, ds.feature_names), args.threshold)
    out = _out(args)
    (out / "aspects.json").write_text(part.to_json(), encoding="utf-8")
    if args.model:
        bundle = _pipeline.ModelBundle.read(args.model)
        X = bundle.transform(ds)
        part = _aspects.AspectPartition.from_list(part.to_list(), X.feature_names, args.threshold)
        res = _aspects.aspect_permutation_importance(bundle.model, X.values, X.labels, part,
                                                     n_repeats=args.n_repeats, seed=args.seed)
        (out / "aspect_importance.json").write_text(json.dumps(res.to_dict(), indent=2), encoding="utf-8")
    for a in part.aspects:
        if len(a.features) > 1:
            print(f"{a.name}: {', '.join(a.features)}")


def _load_rankings(paths):
    out = []
    for p in paths:
        doc = _read_json(p)
        items = doc["rankings"] if isinstance(doc, dict) and "rankings" in doc else doc
        items = items if isinstance(items, list) else [items]
        out += [Ranking.from_dict(d) for d in items]
    return out


def cmd_compare(args):
    out = _out(args)
    if not args.rankings and not args.scores:
        raise ConfigError("compare needs --rankings and/or --scores")
    if args.rankings:
        M = ranking_correlation_matrix(_load_rankings(args.rankings))
        (out / "kendall.csv").write_text(M.to_csv(), encoding="utf-8")
        sys.stdout.write(M.to_csv())
    if args.scores:
        with open(args.scores, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ParseError(f"{args.scores}: no rows")
        cols = {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}
        stat, p = friedman_test(np.column_stack(list(cols.values())))
        pairs = pairwise_wilcoxon(cols)
        doc = {"friedman": {"statistic": stat, "p": p},
               "wilcoxon": [{"a": r.name_a, "b": r.name_b, "W+": r.statistic, "p": r.p,
                             "p_bonferroni": r.p_adjusted} for r in pairs]}
        (out / "tests.json").write_text(json.dumps(doc, indent=2), encoding="utf-8")
        print(json.dumps(doc, indent=2))


def cmd_run(args):
    if not args.config:
        raise ConfigError("run needs --config")
    d = _read_json(args.config)
    if args.seed is not None:
        d["seeds"] = {k: args.seed for k in _pipeline.default_config()["seeds"]}
    if args.threads is not None:
        d["threads"] = args.threads
    if args.out:
        d["out"] = str(Path(args.out).resolve())
    cfg = _pipeline.PipelineConfig.from_dict(d, Path(args.config).parent)
    report = _pipeline.run_pipeline(cfg)
    print(json.dumps(report.scores, indent=2, sort_keys=True))


def cmd_report(args):
    run_dir = args.run or args.out
    if not run_dir:
        raise ConfigError("report needs --run DIR")
    for p in emit_reports(run_dir):
        print(p)


def cmd_config(args):
    if not args.print_defaults:
        raise ConfigError("config: nothing to do (use --print-defaults)")
    print(json.dumps(_pipeline.default_config(), indent=2, sort_keys=True))


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--threads", type=int, default=None, help="upper bound on worker threads")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", help="cohort CSV")
    data.add_argument("--schema", help="column-role schema JSON")
    data.add_argument("--engineer", action="store_true", help="derive sum/diff/ratio features first")
    data.add_argument("--feature-set", choices=["FS1", "FS2", "FS3"])

    kinds = [k.value for k in ModelKind]
    p = argparse.ArgumentParser(prog="cohortxai", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("synth", parents=[common], help="generate a synthetic cohort").set_defaults(fn=cmd_synth)
    s = sub.add_parser("engineer", parents=[common], help="derive ROI asymmetry features")
    s.add_argument("--data", required=True)
    s.add_argument("--schema", required=True)
    s.set_defaults(fn=cmd_engineer)

    s = sub.add_parser("select", parents=[common, data], help="forward selection over MRI features")
    s.add_argument("--model", choices=kinds, default="logreg")
    s.add_argument("--params", help="JSON file overriding default hyperparameters")
    s.set_defaults(fn=cmd_select)

    s = sub.add_parser("tune", parents=[common, data], help="Bayesian hyperparameter tuning")
    s.add_argument("--model", choices=kinds, required=True)
    s.add_argument("--init", type=int, default=10)
    s.add_argument("--iters", type=int, default=25)
    s.add_argument("--folds", type=int, default=10)
    s.add_argument("--repeats", type=int, default=10)
    s.add_argument("--resume", help="continue from a partial trace (JSON lines)")
    s.set_defaults(fn=cmd_tune)

    s = sub.add_parser("train", parents=[common, data], help="fit preprocessing and a model")
    s.add_argument("--model", choices=kinds, required=True)
    s.add_argument("--params", help="JSON file of hyperparameters")
    s.add_argument("--trace", help="use the best configuration of a tuning trace")
    s.set_defaults(fn=cmd_train)

    s = sub.add_parser("evaluate", parents=[common, data], help="score a model on a cohort")
    s.add_argument("--model", required=True, help="model.json")
    s.add_argument("--name", help="cohort label in the score table")
    s.set_defaults(fn=cmd_evaluate)

    s = sub.add_parser("explain", parents=[common, data], help="Kernel SHAP explanations")
    s.add_argument("--model", required=True, help="model.json")
    s.add_argument("--background", help="background cohort CSV (defaults to --data)")
    s.add_argument("--background-schema")
    s.add_argument("--background-size", type=int, default=50)
    s.add_argument("--n-samples", type=int, default=2048)
    s.add_argument("--max-subjects", type=int)
    s.set_defaults(fn=cmd_explain)

    s = sub.add_parser("aspects", parents=[common, data], help="correlation clustering into aspects")
    s.add_argument("--threshold", type=float, default=0.5, help="minimum within-aspect |rho|")
    s.add_argument("--model", help="model.json; adds aspect permutation importance")
    s.add_argument("--n-repeats", type=int, default=10)
    s.set_defaults(fn=cmd_aspects)

    s = sub.add_parser("compare", parents=[common], help="ranking agreement and significance tests")
    s.add_argument("--rankings", nargs="+", help="ranking JSON files")
    s.add_argument("--scores", help="CSV with one column per method, one row per paired run")
    s.set_defaults(fn=cmd_compare)

    sub.add_parser("run", parents=[common], help="full pipeline from a config").set_defaults(fn=cmd_run)

    s = sub.add_parser("report", parents=[common], help="re-render tables and plots of a run")
    s.add_argument("--run", help="run directory")
    s.set_defaults(fn=cmd_report)

    s = sub.add_parser("config", parents=[common], help="configuration helpers")
    s.add_argument("--print-defaults", action="store_true")
    s.set_defaults(fn=cmd_config)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command != "run":
        if args.seed is None:
            args.seed = 0
        if args.threads is None:
            args.threads = 1
    try:
        args.fn(args)
    except Exception as exc:  # mapped to documented exit codes
        code = exit_code(exc)
        print(f"error: {exc}", file=sys.stderr)
        if args.verbose:
            log.exception("%s failed", args.command)
        if code == 1:
            raise
        return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
