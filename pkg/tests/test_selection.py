import json

import numpy as np
import pytest

from cohortxai.dataset import ColumnMeta, TabularDataset, engineer_roi_features, generate_synthetic
from cohortxai.errors import SchemaError
from cohortxai.selection import SelectionResult, apply_selection, forward_select

PLANTED = {"n_subjects": 200, "n_pairs": 10, "n_unpaired": 1, "informative": {0: 2.0},
           "include_socio": False, "include_genetic": False, "n_cognitive": 0}


@pytest.fixture(scope="module")
def planted():
    return engineer_roi_features(generate_synthetic(PLANTED, 0))


def test_planted_feature_first(planted):
    res = forward_select(planted, "logreg", seed=0)
    assert res.selected[0] == "sum_roi00"
    assert all(b > a for a, b in zip(res.accuracies, res.accuracies[1:]))
    mri = set(planted.mri_names())
    assert set(res.selected) <= mri


def test_all_noise_still_selects(planted):
    noise = planted.take_columns([n for n in planted.feature_names if "roi00" not in n])
    res = forward_select(noise, "dtree", seed=2)
    assert len(res.selected) >= 1
    assert all(b > a for a, b in zip(res.accuracies, res.accuracies[1:]))


def test_deterministic_and_threads_agree(planted):
    a = forward_select(planted, "logreg", seed=5)
    assert forward_select(planted, "logreg", seed=5) == a
    assert forward_select(planted, "logreg", seed=5, threads=3) == a


def test_non_mri_columns_ignored():
    raw = generate_synthetic({"n_subjects": 120, "n_pairs": 3, "informative": {1: 2.0},
                              "cognitive_effect": 3.0}, 1)
    ds = engineer_roi_features(raw)
    res = forward_select(ds, "logreg", seed=0)
    non_mri = [c.name for c in ds.columns if not c.is_mri]
    assert not set(res.selected) & set(non_mri)
    shuffled = ds.take_columns(non_mri[::-1] + ds.mri_names())
    assert forward_select(shuffled, "logreg", seed=0) == res
    kept = apply_selection(ds, res)
    assert set(kept.feature_names) == set(res.selected) | set(non_mri)
    assert [n for n in ds.feature_names if n in kept.feature_names] == kept.feature_names


def test_json_roundtrip(planted):
    res = forward_select(planted, "logreg", seed=1)
    doc = json.loads(res.to_json())
    assert doc["kind"] == "logreg" and doc["steps"][0]["feature"] == res.selected[0]
    assert SelectionResult.from_dict(doc) == res


def test_failed_candidate_scores_zero(planted, caplog):
    res = forward_select(planted, "gboost", seed=0, params={"n_estimators": 5, "learning_rate": -1.0})
    # the first round admits its argmax even at 0; nothing can improve on it
    assert res.accuracies == (0.0,)
    assert res.selected == (planted.mri_names()[0],)
    assert "scored 0" in caplog.text


def test_requires_mri_columns():
    ds = TabularDataset(("a", "b"), (ColumnMeta("age", "sociodemographic"),), np.array([[1.0], [2.0]]), [0, 1])
    with pytest.raises(SchemaError):
        forward_select(ds, "logreg")
