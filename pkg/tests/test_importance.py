import json

import numpy as np
import pytest

from cohortxai.errors import ConfigError, UndefinedCorrelationError
from cohortxai.explain import explain_dataset, summary_ranking
from cohortxai.importance import (
    METRICS,
    Ranking,
    kendall_tau,
    permutation_importance,
    ranking_correlation_matrix,
    rankings_to_json,
)
from cohortxai.models import natural_importance, train
from oracles import oracle_kendall


def R(method, features, scores=None):
    return Ranking(method, features, scores)


def test_kendall_examples():
    a = R("a", ["w", "x", "y", "z"])
    assert kendall_tau(a, a) == 1.0
    assert kendall_tau(a, R("b", ["z", "y", "x", "w"])) == -1.0
    assert kendall_tau(a, R("c", ["x", "w", "y", "z"])) == pytest.approx(1 - 2 / 6)


def test_kendall_matches_pair_counting(rng):
    for _ in range(1000):
        n = int(rng.integers(2, 12))
        names = [f"f{i}" for i in range(n)]
        sa = np.round(rng.normal(size=n), 1) if rng.random() < 0.5 else rng.integers(0, 3, n).astype(float)
        sb = rng.integers(0, 4, n).astype(float)
        a, b = Ranking.from_scores("a", names, sa), Ranking.from_scores("b", names, sb)
        try:
            want = oracle_kendall(sa, sb).value
        except ValueError:
            with pytest.raises(UndefinedCorrelationError):
                kendall_tau(a, b)
            continue
        assert abs(kendall_tau(a, b) - want) <= 1e-12


def test_kendall_antisymmetric_under_reversal(rng):
    names = [f"f{i}" for i in range(9)]
    s = rng.normal(size=9)
    t = rng.normal(size=9)
    a, b = Ranking.from_scores("a", names, s), Ranking.from_scores("b", names, t)
    assert kendall_tau(a, Ranking.from_scores("r", names, -t)) == pytest.approx(-kendall_tau(a, b))


def test_kendall_uses_common_features():
    a = R("a", ["p", "q", "r", "s"])
    b = R("b", ["q", "x", "p", "r"])
    assert kendall_tau(a, b) == pytest.approx(1 / 3)
    with pytest.raises(UndefinedCorrelationError):
        kendall_tau(a, R("c", ["q", "z"]))


def test_ranking_validation():
    with pytest.raises(ValueError):
        R("a", ["x", "x"])
    with pytest.raises(ValueError):
        R("a", ["x", "y"], [0.1, 0.5])
    r = Ranking.from_scores("m", ["a", "b", "c"], [0.2, 0.5, 0.2])
    assert r.features == ("b", "a", "c")
    assert Ranking.from_dict(json.loads(rankings_to_json([r]))[0]) == r


def test_matrix_symmetric_with_missing_pairs():
    rs = [R("a", ["p", "q", "r"]), R("b", ["p", "q", "r"]), R("c", ["r", "q", "p"]), R("d", ["zz", "p"])]
    M = ranking_correlation_matrix(rs)
    assert M["a", "b"] == 1.0 and M["a", "c"] == -1.0
    np.testing.assert_allclose(np.nan_to_num(M.values), np.nan_to_num(M.values.T), atol=1e-12)
    assert np.isnan(M["a", "d"])
    assert M.coverage[0, 3] == 1
    lines = M.to_csv().splitlines()
    assert lines[0] == "method,a,b,c,d"
    assert lines[1].endswith(",")
    with pytest.raises(ValueError):
        ranking_correlation_matrix(rs[:1])


@pytest.mark.parametrize("metric", sorted(METRICS))
def test_ignored_feature_has_zero_drop(metric, rng):
    X = rng.normal(size=(150, 3))
    y = (X[:, 0] + 0.3 * rng.normal(size=150) > 0).astype(int)
    f = lambda Z: 1 / (1 + np.exp(-2 * Z[:, 0]))  # noqa: E731
    res = permutation_importance(f, X, y, metric=metric, n_repeats=4, seed=0)
    assert res.importances[1] == 0.0 and res.importances[2] == 0.0
    assert res.importances[0] > 0


def test_permutation_planted_and_deterministic(rng):
    X = rng.normal(size=(300, 5))
    y = (2 * X[:, 2] + rng.normal(size=300) > 0).astype(int)
    m = train("rforest", {"n_estimators": 40}, X, y)
    res = permutation_importance(m, X, y, n_repeats=5, seed=3)
    assert int(np.argmax(res.importances)) == 2
    assert np.sum(res.importances == res.importances.max()) == 1
    a = permutation_importance(m, X, y, n_repeats=1, seed=9).importances
    b = permutation_importance(m, X, y, n_repeats=1, seed=9).importances
    np.testing.assert_array_equal(a, b)
    assert res.ranking().features[0] == "x2"
    assert res.to_dict()["entries"][2]["name"] == "x2"


def test_unknown_metric(rng):
    with pytest.raises(ConfigError):
        permutation_importance(lambda Z: Z[:, 0], rng.normal(size=(5, 2)), [0, 1, 0, 1, 0], metric="r2")


def test_stump_shap_and_permutation_agree():
    r = np.random.default_rng(2)
    X = r.normal(size=(100, 2))
    y = (X[:, 0] > 0).astype(int)
    m = train("dtree", {"max_depth": 1}, X, y, feature_names=["used", "unused"])
    shap = summary_ranking(explain_dataset(m, X[:20], X[20:40], n_samples=8))
    perm = permutation_importance(m, X, y, n_repeats=3)
    a = Ranking.from_scores("shap", shap.features, shap.mean_abs)
    b = perm.ranking()
    assert kendall_tau(a, b) == 1.0
    nat = Ranking.from_scores("natural", m.feature_names, natural_importance(m))
    assert kendall_tau(a, nat) == 1.0
