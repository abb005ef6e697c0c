"""The reference implementations checked against hand-computable cases."""
import numpy as np
import pytest
from scipy import stats

from oracles import (
    OracleRefusal,
    oracle_auroc,
    oracle_confusion_scores,
    oracle_friedman_permutation,
    oracle_friedman_statistic,
    oracle_kendall,
    oracle_shapley,
    oracle_stump,
    oracle_wilcoxon,
)


def test_shapley_linear_closed_form():
    base, phi = oracle_shapley(lambda X: X @ [2.0, 3.0], np.zeros((1, 2)), np.ones(2)).value
    assert base == 0.0
    np.testing.assert_allclose(phi, [2.0, 3.0])


def test_shapley_refuses_large():
    with pytest.raises(OracleRefusal):
        oracle_shapley(lambda X: X[:, 0], np.zeros((1, 16)), np.zeros(16))


def test_kendall_hand_cases():
    assert oracle_kendall([1, 2, 3, 4], [1, 2, 4, 3]).value == pytest.approx(2 / 3)
    assert oracle_kendall([1, 2, 3], [3, 2, 1]).value == -1.0
    with pytest.raises(OracleRefusal):
        oracle_kendall([1, 1, 1], [1, 2, 3])
    a, b = [1, 1, 2, 3, 3], [2, 1, 1, 3, 2]
    assert oracle_kendall(a, b).value == pytest.approx(stats.kendalltau(a, b).statistic)


def test_wilcoxon_hand_cases():
    assert oracle_wilcoxon([1, 2, 3, 4, 5]).value == 2 / 32
    assert oracle_wilcoxon([0, 0]).value == 1.0
    assert oracle_wilcoxon([1, -2]).value == 1.0


def test_friedman_oracles():
    R = np.array([[1, 2, 3], [1, 2, 3], [1, 2, 3], [1, 2, 3.0]])
    assert oracle_friedman_statistic(R).value == pytest.approx(8.0)
    assert oracle_friedman_permutation(R, 500, 0).value < 0.05


def test_stump_and_scores_and_auroc():
    assert oracle_stump([[0], [1], [2], [3]], [0, 0, 1, 1]).value == 0
    assert oracle_stump([[0], [1], [0], [1]], [0, 1, 1, 0]).value == 2
    assert oracle_confusion_scores(2, 1, 0, 3)[0] == pytest.approx(5 / 6)
    assert oracle_auroc([0, 0, 1, 1], [0.1, 0.4, 0.35, 0.8]) == 0.75
