"""Tabular cohort data: ingestion, ROI feature engineering, feature sets,
stratified splitting, fold plans, preprocessing and synthetic cohorts.

Missing cells are stored as NaN in memory and as empty strings in CSV.
"""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import ConfigError, IntegrityError, ParseError, SchemaError

ROLES = (
    "roi_left",
    "roi_right",
    "roi_unpaired",
    "engineered_sum",
    "engineered_diff",
    "engineered_ratio",
    "sociodemographic",
    "genetic",
    "cognitive",
)
MRI_ROLES = frozenset(
    {"roi_left", "roi_right", "roi_unpaired", "engineered_sum", "engineered_diff", "engineered_ratio"}
)
ETIV_NAME = "eTIV"


class FeatureSet(str, Enum):
    FS1 = "FS1"
    FS2 = "FS2"
    FS3 = "FS3"

    @classmethod
    def parse(cls, value) -> "FeatureSet":
        if isinstance(value, cls):
            return value
        key = str(value).upper().replace("-", "")
        try:
            return cls(key)
        except ValueError:
            raise ConfigError(f"unknown feature set {value!r}; expected FS1, FS2 or FS3") from None


_FS_ROLES = {
    FeatureSet.FS1: ("sociodemographic",),
    FeatureSet.FS2: ("sociodemographic", "genetic"),
    FeatureSet.FS3: ("sociodemographic", "genetic", "cognitive"),
}


@dataclass(frozen=True)
class ColumnMeta:
    name: str
    role: str
    pair_key: str | None = None

    def __post_init__(self):
        if self.role not in ROLES:
            raise SchemaError(f"column {self.name!r}: unknown role {self.role!r}")
        if self.role in ("roi_left", "roi_right") and not self.pair_key:
            raise SchemaError(f"column {self.name!r}: {self.role} requires a pair_key")

    @property
    def is_mri(self) -> bool:
        return self.role in MRI_ROLES


@dataclass(frozen=True, eq=False)
class TabularDataset:
    """Immutable feature table with per-column roles and binary labels.

    ``metadata`` carries free-form annotations; the synthetic generator puts
    its ground truth (informative column names) there.
    """

    subject_ids: tuple
    columns: tuple
    values: np.ndarray
    labels: np.ndarray
    class_names: tuple = ("control", "patient")
    metadata: Mapping = field(default_factory=dict)

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        if values.ndim != 2:
            values = values.reshape(len(self.subject_ids), -1)
        labels = np.array(self.labels, copy=True)
        if labels.dtype.kind == "f":
            if not np.all(np.isfinite(labels)):
                raise IntegrityError("labels must not contain missing values")
        labels = labels.astype(np.int64)
        object.__setattr__(self, "subject_ids", tuple(str(s) for s in self.subject_ids))
        object.__setattr__(self, "columns", tuple(self.columns))
        n = len(self.subject_ids)
        if values.shape != (n, len(self.columns)):
            raise IntegrityError(
                f"values shape {values.shape} does not match {n} subjects x {len(self.columns)} columns"
            )
        if labels.shape != (n,):
            raise IntegrityError(f"{labels.shape[0]} labels for {n} subjects")
        if len(set(self.subject_ids)) != n:
            raise IntegrityError("duplicate subject IDs")
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            dupes = sorted({x for x in names if names.count(x) > 1})
            raise IntegrityError(f"duplicate column names: {dupes}")
        if n and not np.isin(labels, (0, 1)).all():
            raise IntegrityError("labels must be 0/1")
        if len(self.class_names) != 2:
            raise IntegrityError("exactly two class names are required")
        _check_pairs(self.columns)
        values.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_names", tuple(self.class_names))
        object.__setattr__(self, "metadata", dict(self.metadata))

    @property
    def feature_names(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def n_subjects(self) -> int:
        return len(self.subject_ids)

    def column_index(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise KeyError(name)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.column_index(name)]

    def names_with_roles(self, roles) -> list[str]:
        roles = set(roles)
        return [c.name for c in self.columns if c.role in roles]

    def mri_names(self) -> list[str]:
        return self.names_with_roles(MRI_ROLES)

    def take_rows(self, idx) -> "TabularDataset":
        idx = np.asarray(idx, dtype=int)
        return replace(
            self,
            subject_ids=tuple(self.subject_ids[i] for i in idx),
            values=self.values[idx],
            labels=self.labels[idx],
        )

    def take_columns(self, names: Sequence[str]) -> "TabularDataset":
        idx = [self.column_index(n) for n in names]
        return replace(self, columns=tuple(self.columns[i] for i in idx), values=self.values[:, idx])

    def align_columns(self, names: Sequence[str]) -> "TabularDataset":
        """Reorder to ``names``; columns absent here are added as all-missing."""
        have = set(self.feature_names)
        absent = [n for n in names if n not in have]
        if absent:
            warnings.warn(f"columns absent from cohort, treated as missing: {absent}", stacklevel=2)
        cols, vals = [], []
        for n in names:
            if n in have:
                i = self.column_index(n)
                cols.append(self.columns[i])
                vals.append(self.values[:, i])
            else:
                cols.append(ColumnMeta(n, "sociodemographic"))
                vals.append(np.full(self.n_subjects, np.nan))
        values = np.column_stack(vals) if vals else np.empty((self.n_subjects, 0))
        return replace(self, columns=tuple(cols), values=values)


def _check_pairs(columns):
    left = {c.pair_key for c in columns if c.role == "roi_left"}
    right = {c.pair_key for c in columns if c.role == "roi_right"}
    if left != right:
        raise IntegrityError(f"unmatched ROI pairs: {sorted(left ^ right)}")
    for role in ("roi_left", "roi_right"):
        keys = [c.pair_key for c in columns if c.role == role]
        if len(keys) != len(set(keys)):
            raise IntegrityError(f"ROI pair key used twice for {role}")


# -- CSV ingestion -----------------------------------------------------------


def load_schema(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def load_csv(path, schema) -> TabularDataset:
    """Read a cohort CSV using a role schema (a dict or a path to the JSON).

    Schema layout::

        {"label_column": "diagnosis",
         "classes": ["CN", "AD"],          # values mapped to 0 and 1
         "columns": {"left_hippo": {"role": "roi_left", "pair_key": "hippo"}, ...}}
    """
    if not isinstance(schema, Mapping):
        schema = load_schema(schema)
    try:
        label_col = schema["label_column"]
        classes = [str(c) for c in schema["classes"]]
        colspec = schema["columns"]
    except KeyError as exc:
        raise SchemaError(f"schema lacks required key {exc}") from None
    if len(classes) != 2:
        raise SchemaError("schema must list exactly two classes")

    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError("empty file", row=1)
    header = rows[0]
    if label_col not in header:
        raise SchemaError(f"label column {label_col!r} not in header")
    id_col = header[0]
    feature_cols = [h for h in header[1:] if h != label_col]
    unknown = [h for h in feature_cols if h not in colspec]
    if unknown:
        raise SchemaError(f"no role assigned to columns: {unknown}")
    columns = [
        ColumnMeta(h, colspec[h]["role"], colspec[h].get("pair_key")) for h in feature_cols
    ]
    pos = {h: i for i, h in enumerate(header)}
    label_pos = pos[label_col]

    ids, labels, values = [], [], []
    seen = set()
    for rownum, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(
                f"row {rownum}: expected {len(header)} fields, found {len(row)}", row=rownum
            )
        sid = row[0]
        if sid in seen:
            raise IntegrityError(f"row {rownum}: duplicate subject ID {sid!r}")
        seen.add(sid)
        lab = row[label_pos].strip()
        if lab not in classes:
            raise SchemaError(f"row {rownum}: unknown label value {lab!r}")
        vals = []
        for h in feature_cols:
            cell = row[pos[h]].strip()
            if cell == "":
                vals.append(math.nan)
                continue
            try:
                vals.append(float(cell))
            except ValueError:
                raise ParseError(f"row {rownum}: column {h!r} is not numeric: {cell!r}", row=rownum) from None
        ids.append(sid)
        labels.append(classes.index(lab))
        values.append(vals)
    arr = np.array(values, dtype=float).reshape(len(ids), len(columns))
    return TabularDataset(tuple(ids), tuple(columns), arr, np.array(labels, dtype=int), tuple(classes))


def schema_for(ds: TabularDataset, label_column: str = "label") -> dict:
    cols = {}
    for c in ds.columns:
        spec = {"role": c.role}
        if c.pair_key is not None:
            spec["pair_key"] = c.pair_key
        cols[c.name] = spec
    return {"label_column": label_column, "classes": list(ds.class_names), "columns": cols}


def write_csv(ds: TabularDataset, path, schema_path=None, label_column: str = "label") -> dict:
    """Write ``ds`` as CSV; optionally write the matching schema JSON too."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject_id", *ds.feature_names, label_column])
        for sid, row, lab in zip(ds.subject_ids, ds.values, ds.labels):
            cells = ["" if math.isnan(v) else repr(float(v)) for v in row]
            w.writerow([sid, *cells, ds.class_names[lab]])
    schema = schema_for(ds, label_column)
    if schema_path is not None:
        Path(schema_path).write_text(json.dumps(schema, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return schema


# -- feature engineering -----------------------------------------------------


def _etiv_index(ds: TabularDataset) -> int:
    for i, c in enumerate(ds.columns):
        if c.name.lower() == ETIV_NAME.lower():
            return i
    raise SchemaError(f"dataset has no {ETIV_NAME} column")


def engineer_roi_features(ds: TabularDataset) -> TabularDataset:
    """Replace left/right ROI volumes by eTIV-normalised sum, difference and
    the left/right ratio. Unpaired volumes are divided by eTIV; eTIV itself
    is kept in its original units."""
    etiv_i = _etiv_index(ds)
    if not any(c.role == "roi_left" for c in ds.columns):
        raise SchemaError("dataset has no matched roi_left/roi_right pair")
    etiv = ds.values[:, etiv_i].copy()
    etiv[~(etiv > 0)] = np.nan

    right_of = {c.pair_key: i for i, c in enumerate(ds.columns) if c.role == "roi_right"}
    out_cols, out_vals = [], []
    with np.errstate(divide="ignore", invalid="ignore"):
        for i, c in enumerate(ds.columns):
            if c.role == "roi_left":
                left = ds.values[:, i]
                right = ds.values[:, right_of[c.pair_key]]
                ratio = left / right
                ratio[~np.isfinite(ratio)] = np.nan
                for role, prefix, v in (
                    ("engineered_sum", "sum", (left + right) / etiv),
                    ("engineered_diff", "diff", (left - right) / etiv),
                    ("engineered_ratio", "ratio", ratio),
                ):
                    out_cols.append(ColumnMeta(f"{prefix}_{c.pair_key}", role, c.pair_key))
                    out_vals.append(v)
            elif c.role == "roi_right":
                continue
            elif c.role == "roi_unpaired" and i != etiv_i:
                out_cols.append(c)
                out_vals.append(ds.values[:, i] / etiv)
            else:
                out_cols.append(c)
                out_vals.append(ds.values[:, i])
    return replace(ds, columns=tuple(out_cols), values=np.column_stack(out_vals))


def select_feature_set(ds: TabularDataset, fs) -> TabularDataset:
    """Filter to MRI columns plus the non-MRI roles of the requested set."""
    fs = FeatureSet.parse(fs)
    roles = set(MRI_ROLES) | set(_FS_ROLES[fs])
    present = {c.role for c in ds.columns}
    for role in _FS_ROLES[fs]:
        if role not in present:
            warnings.warn(f"{fs.value}: no {role} columns in dataset", stacklevel=2)
    return ds.take_columns([c.name for c in ds.columns if c.role in roles])


# -- splitting ---------------------------------------------------------------


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class SplitIndices:
    train: np.ndarray
    test: np.ndarray

    def to_dict(self, ds: TabularDataset | None = None) -> dict:
        if ds is None:
            return {"train": self.train.tolist(), "test": self.test.tolist()}
        return {
            "train": [ds.subject_ids[i] for i in self.train],
            "test": [ds.subject_ids[i] for i in self.test],
        }


def stratified_split(ds_or_labels, test_fraction: float, seed: int) -> SplitIndices:
    """Hold out ``test_fraction`` of every class.

    Test counts are rounded half up per class; the last class absorbs the
    rounding so the total matches ``round(n * test_fraction)``.
    """
    y = _labels_of(ds_or_labels)
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie in (0, 1)")
    classes = np.unique(y)
    counts = [int(np.sum(y == c)) for c in classes]
    if len(classes) < 2 or min(counts) < 2:
        raise ValueError("both classes need at least two subjects")
    n_test = [round_half_up(n * test_fraction) for n in counts]
    n_test[-1] = round_half_up(len(y) * test_fraction) - sum(n_test[:-1])
    for c, n, t in zip(classes, counts, n_test):
        if t <= 0 or t >= n:
            raise ValueError(f"test_fraction {test_fraction} leaves an empty partition for class {c}")
    rng = np.random.default_rng(seed)
    test = []
    for c, t in zip(classes, n_test):
        idx = np.flatnonzero(y == c)
        test.extend(rng.permutation(idx)[:t])
    test = np.sort(np.array(test, dtype=int))
    train = np.setdiff1d(np.arange(len(y)), test)
    return SplitIndices(train, test)


@dataclass(frozen=True)
class FoldPlan:
    """``assignment[r, i]`` is the validation fold of row ``i`` in repeat ``r``."""

    repeats: int
    folds_per_repeat: int
    assignment: np.ndarray

    def __len__(self):
        return self.repeats * self.folds_per_repeat

    def splits(self) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        for r in range(self.repeats):
            a = self.assignment[r]
            for k in range(self.folds_per_repeat):
                yield np.flatnonzero(a != k), np.flatnonzero(a == k)


def stratified_repeated_kfold(ds_or_labels, k: int, repeats: int, seed: int) -> FoldPlan:
    y = _labels_of(ds_or_labels)
    if k < 2 or repeats < 1:
        raise ValueError("need k >= 2 and repeats >= 1")
    classes = np.unique(y)
    for c in classes:
        if np.sum(y == c) < k:
            raise ValueError(f"class {c} has {np.sum(y == c)} subjects, fewer than k={k}")
    rng = np.random.default_rng(seed)
    assignment = np.empty((repeats, len(y)), dtype=int)
    for r in range(repeats):
        offset = 0
        for c in classes:
            idx = rng.permutation(np.flatnonzero(y == c))
            assignment[r, idx] = (offset + np.arange(len(idx))) % k
            offset += len(idx)
    return FoldPlan(repeats, k, assignment)


def _labels_of(obj) -> np.ndarray:
    if isinstance(obj, TabularDataset):
        return obj.labels
    return np.asarray(obj, dtype=int)


# -- preprocessing -----------------------------------------------------------


@dataclass(frozen=True)
class PreprocessParams:
    mean: np.ndarray
    std: np.ndarray
    median: np.ndarray
    feature_names: tuple = ()

    def to_dict(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "median": self.median.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> "PreprocessParams":
        return cls(
            np.asarray(d["mean"], dtype=float),
            np.asarray(d["std"], dtype=float),
            np.asarray(d["median"], dtype=float),
            tuple(d.get("feature_names", ())),
        )


def _matrix(view):
    if isinstance(view, TabularDataset):
        return view.values, tuple(view.feature_names)
    return np.asarray(view, dtype=float), ()


def fit_preprocess(train_view) -> PreprocessParams:
    """Median imputation followed by standardisation, fitted on training rows."""
    X, names = _matrix(train_view)
    X = np.array(X, dtype=float, copy=True).reshape(len(X), -1)
    median = np.zeros(X.shape[1])
    for j in range(X.shape[1]):
        col = X[:, j]
        ok = ~np.isnan(col)
        if ok.any():
            median[j] = np.median(col[ok])
        else:
            warnings.warn(f"column {names[j] if names else j} is entirely missing; median set to 0", stacklevel=2)
        col[~ok] = median[j]
    mean = X.mean(axis=0) if len(X) else np.zeros(X.shape[1])
    std = X.std(axis=0) if len(X) else np.ones(X.shape[1])
    std = np.where(std > 0, std, 1.0)
    return PreprocessParams(mean, std, median, names)


def apply_preprocess(params: PreprocessParams, view):
    """Impute and standardise ``view`` with previously fitted statistics.

    A ``TabularDataset`` comes back as a dataset (labels untouched); an
    array comes back as an array.
    """
    X, _ = _matrix(view)
    X = np.array(X, dtype=float, copy=True).reshape(len(X), -1)
    if X.shape[1] != len(params.mean):
        raise ValueError(f"expected {len(params.mean)} columns, got {X.shape[1]}")
    X = np.where(np.isnan(X), params.median, X)
    X = (X - params.mean) / params.std
    if isinstance(view, TabularDataset):
        return replace(view, values=X)
    return X


# -- synthetic cohorts -------------------------------------------------------

_UNPAIRED_NAMES = ("ventricle3", "ventricle4", "brainstem", "csf")
_SOCIO = ("age", "gender", "education")
_COGNITIVE = ("MMSCORE", "LDELTOTAL", "LIMMTOTAL")


@dataclass
class CohortConfig:
    """Recipe for a synthetic cohort.

    Effect sizes are class-mean differences in within-class standard
    deviations. ``informative`` maps ROI pair index to the effect on the
    pair's eTIV-normalised sum; ``asymmetric`` does the same for the
    left-minus-right difference. ``shift`` moves every ROI and cognitive
    column of the whole cohort by that many standard deviations (an external
    cohort with covariate shift).
    """

    n_subjects: int = 200
    class_balance: float = 0.5
    n_pairs: int = 10
    n_unpaired: int = 5
    informative: dict = field(default_factory=dict)
    asymmetric: dict = field(default_factory=dict)
    lr_correlation: float = 0.8
    cognitive_effect: float = 0.0
    cognitive_effects: tuple | None = None
    apoe_effect: float = 0.0
    age_effect: float = 0.0
    missing_rate: float = 0.0
    shift: float = 0.0
    include_socio: bool = True
    include_education: bool = True
    include_genetic: bool = True
    n_cognitive: int = 3
    class_names: tuple = ("control", "patient")
    id_prefix: str = "S"

    @classmethod
    def from_dict(cls, d) -> "CohortConfig":
        d = dict(d)
        for key in ("informative", "asymmetric"):
            if key in d:
                d[key] = {int(k): float(v) for k, v in d[key].items()}
        for key in ("class_names", "cognitive_effects"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown cohort settings: {sorted(extra)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["informative"] = {str(k): v for k, v in self.informative.items()}
        d["asymmetric"] = {str(k): v for k, v in self.asymmetric.items()}
        d["class_names"] = list(self.class_names)
        if self.cognitive_effects is not None:
            d["cognitive_effects"] = list(self.cognitive_effects)
        return d


def _pair_key(p: int) -> str:
    return f"roi{p:02d}"


def generate_synthetic(config: CohortConfig | Mapping, seed: int) -> TabularDataset:
    """Draw a cohort with raw left/right ROI volumes, eTIV, covariates and labels.

    Labels are balanced exactly; each ROI pair shares a latent factor so the
    two hemispheres correlate at ``lr_correlation``; informative pairs shift
    that latent with the class. Volumes scale with eTIV so that normalised
    features keep the declared effect sizes.
    """
    cfg = config if isinstance(config, CohortConfig) else CohortConfig.from_dict(config)
    for p in list(cfg.informative) + list(cfg.asymmetric):
        if not 0 <= p < cfg.n_pairs:
            raise ConfigError(f"effect declared for ROI pair {p}, but only {cfg.n_pairs} pairs exist")
    if cfg.n_unpaired < 1:
        raise ConfigError("n_unpaired must be >= 1 (eTIV is always present)")
    if not 0 <= cfg.missing_rate < 1:
        raise ConfigError("missing_rate must lie in [0, 1)")
    if not 0 <= cfg.lr_correlation <= 1:
        raise ConfigError("lr_correlation must lie in [0, 1]")
    if cfg.cognitive_effects is not None and len(cfg.cognitive_effects) != cfg.n_cognitive:
        raise ConfigError("cognitive_effects must list one effect per cognitive column")
    n = cfg.n_subjects
    rng = np.random.default_rng(seed)

    n_pos = round_half_up(n * cfg.class_balance)
    y = np.zeros(n, dtype=int)
    y[:n_pos] = 1
    y = rng.permutation(y)
    centered = y - 0.5

    etiv = 1500.0 * (1 + 0.1 * rng.standard_normal(n))
    etiv = np.clip(etiv, 900.0, None)
    scale = etiv / 1500.0

    cols, vals = [], []
    rho = cfg.lr_correlation
    mu, sd = 100.0, 10.0
    for p in range(cfg.n_pairs):
        key = _pair_key(p)
        z = rng.standard_normal(n)
        eL, eR = rng.standard_normal(n), rng.standard_normal(n)
        a = mu + sd * (math.sqrt(rho) * z + math.sqrt(1 - rho) * eL)
        b = mu + sd * (math.sqrt(rho) * z + math.sqrt(1 - rho) * eR)
        # sum shift of delta * sd(L+R); per-hemisphere half of that
        delta = cfg.informative.get(p, 0.0)
        half = 0.5 * delta * sd * math.sqrt(2 * (1 + rho))
        asym = 0.5 * cfg.asymmetric.get(p, 0.0) * sd * math.sqrt(2 * (1 - rho) + 1e-12)
        a = a + centered * (half + asym) + cfg.shift * sd
        b = b + centered * (half - asym) + cfg.shift * sd
        a, b = np.clip(a, 1.0, None), np.clip(b, 1.0, None)
        cols += [ColumnMeta(f"left_{key}", "roi_left", key), ColumnMeta(f"right_{key}", "roi_right", key)]
        vals += [a * scale, b * scale]
    for u in range(cfg.n_unpaired - 1):
        name = _UNPAIRED_NAMES[u] if u < len(_UNPAIRED_NAMES) else f"unpaired{u}"
        v = 50.0 + 5.0 * (rng.standard_normal(n) + cfg.shift)
        cols.append(ColumnMeta(name, "roi_unpaired"))
        vals.append(np.clip(v, 1.0, None) * scale)
    cols.append(ColumnMeta(ETIV_NAME, "roi_unpaired"))
    vals.append(etiv)

    if cfg.include_socio:
        cols.append(ColumnMeta("age", "sociodemographic"))
        vals.append(np.round(73 + 6 * (rng.standard_normal(n) + cfg.age_effect * centered), 1))
        cols.append(ColumnMeta("gender", "sociodemographic"))
        vals.append(rng.integers(0, 2, n).astype(float))
        if cfg.include_education:
            cols.append(ColumnMeta("education", "sociodemographic"))
            vals.append(np.clip(np.round(16 + 2.5 * rng.standard_normal(n)), 6, 22))
    if cfg.include_genetic:
        p_carrier = 1 / (1 + np.exp(-(-0.5 + 2 * cfg.apoe_effect * centered)))
        cols.append(ColumnMeta("APOE4", "genetic"))
        vals.append(rng.binomial(1, p_carrier) + rng.binomial(1, p_carrier * 0.3))
    effects = cfg.cognitive_effects or (cfg.cognitive_effect,) * cfg.n_cognitive
    for c in range(cfg.n_cognitive):
        name = _COGNITIVE[c] if c < len(_COGNITIVE) else f"cognitive{c}"
        v = 10.0 * rng.standard_normal(n) - 10.0 * effects[c] * centered - 10.0 * cfg.shift + 50.0
        cols.append(ColumnMeta(name, "cognitive"))
        vals.append(v)

    X = np.column_stack(vals).astype(float)
    if cfg.missing_rate > 0:
        n_missing = round_half_up(cfg.missing_rate * X.size)
        flat = rng.choice(X.size, size=n_missing, replace=False)
        X.flat[flat] = np.nan

    informative = []
    for p, d in cfg.informative.items():
        if d:
            informative += [f"left_{_pair_key(p)}", f"right_{_pair_key(p)}"]
    informative_engineered = [f"sum_{_pair_key(p)}" for p, d in sorted(cfg.informative.items()) if d]
    informative_engineered += [f"diff_{_pair_key(p)}" for p, d in sorted(cfg.asymmetric.items()) if d]
    if cfg.n_cognitive:
        informative_engineered += [
            _COGNITIVE[c] if c < len(_COGNITIVE) else f"cognitive{c}"
            for c in range(cfg.n_cognitive)
            if effects[c]
        ]
    if cfg.include_genetic and cfg.apoe_effect:
        informative_engineered.append("APOE4")
    if cfg.include_socio and cfg.age_effect:
        informative_engineered.append("age")
    width = len(str(n))
    meta = {
        "seed": seed,
        "config": cfg.to_dict(),
        "informative_raw": informative,
        "informative": informative_engineered,
    }
    ids = tuple(f"{cfg.id_prefix}{i:0{width}d}" for i in range(n))
    return TabularDataset(ids, tuple(cols), X, y, tuple(cfg.class_names), meta)
