import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cohortxai.dataset import stratified_repeated_kfold
from cohortxai.models import ModelKind, param_space
from cohortxai.tuning import (
    NOISE_GRID,
    ParamDomain,
    TuneTrace,
    acquisition_lcb,
    bayes_optimize,
    cv_objective,
    decode,
    encode,
    gp_fit,
    gp_predict,
    lhd_init,
    propose_next,
    tune,
)

UNIT = [ParamDomain("x", "continuous", 0.0, 1.0)]


def _strata(U, n):
    return np.sort(np.floor(U * n).astype(int), axis=0)


def test_lhd_one_dimension():
    recs = lhd_init(UNIT, 10, 3)
    cells = sorted(int(r["x"] * 10) for r in recs)
    assert cells == list(range(10))


@given(st.integers(2, 25), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_lhd_every_marginal_stratified(n, d, seed):
    space = [ParamDomain(f"p{i}", "continuous", 0.0, 1.0) for i in range(d)]
    _, U = lhd_init(space, n, seed, return_unit=True)
    assert U.shape == (n, d)
    assert np.all(_strata(U, n) == np.arange(n)[:, None])


def test_lhd_deterministic_and_checks():
    assert lhd_init(UNIT, 10, 5) == lhd_init(UNIT, 10, 5)
    assert lhd_init(UNIT, 10, 5) != lhd_init(UNIT, 10, 6)
    with pytest.raises(ValueError):
        lhd_init([], 10, 0)
    with pytest.raises(ValueError):
        lhd_init(UNIT, 1, 0)


def test_domain_validation():
    from cohortxai.errors import ConfigError

    with pytest.raises(ConfigError):
        ParamDomain("c", "categorical")
    with pytest.raises(ConfigError):
        ParamDomain("x", "continuous", 2.0, 1.0)
    with pytest.raises(ConfigError):
        ParamDomain("x", "log_continuous", 0.0, 1.0)
    with pytest.raises(ConfigError):
        ParamDomain("x", "continuous", 0.0, float("inf"))


@pytest.mark.parametrize("kind", [k.value for k in ModelKind])
def test_decode_encode_roundtrip(kind, rng):
    space = param_space(kind, 8)
    for u in rng.random((50, len(space))):
        rec = decode(space, u)
        for d in space:
            assert d.contains(rec[d.name])
        again = decode(space, encode(space, rec))
        for d in space:
            if d.kind == "log_continuous":
                assert again[d.name] == pytest.approx(rec[d.name], rel=1e-12)
            elif d.kind == "continuous":
                assert again[d.name] == pytest.approx(rec[d.name], rel=1e-12, abs=1e-15)
            else:
                assert again[d.name] == rec[d.name]


def test_integer_rounding_half_up():
    d = ParamDomain("k", "integer", 1, 3)
    assert [d.decode(u) for u in (0.0, 0.24, 0.25, 0.74, 0.75, 1.0)] == [1, 1, 2, 2, 3, 3]


def test_categorical_bins():
    d = ParamDomain("g", "categorical", categories=("scale", "auto"))
    assert d.decode(0.49) == "scale" and d.decode(0.5) == "auto" and d.decode(1.0) == "auto"


def test_gp_constant_target():
    X = np.array([[0.1], [0.4], [0.8]])
    gp = gp_fit(X, [0.7, 0.7, 0.7])
    mu, sd = gp_predict(gp, np.array([[0.0], [0.4], [0.95]]))
    np.testing.assert_allclose(mu, 0.7, atol=1e-12)
    assert gp_predict(gp, [0.4])[1] < 1e-5


def test_gp_interpolates_sine():
    X = np.linspace(0.0, 1.0, 5)[:, None]
    y = np.sin(2 * np.pi * X[:, 0])
    for floor in (0.0, NOISE_GRID[0]):
        gp = gp_fit(X, y, noise_grid=(floor,))
        mu, _ = gp_predict(gp, X)
        np.testing.assert_allclose(mu, y, atol=1e-3 if floor else 1e-6)


def test_gp_sigma_smaller_at_data(rng):
    X = rng.random((6, 2))
    gp = gp_fit(X, rng.random(6))
    grid = rng.random((500, 2))
    far = grid[np.argmax(np.min(np.abs(grid[:, None] - X[None]).max(-1), axis=1))]
    _, sd_far = gp_predict(gp, far)
    _, sd_data = gp_predict(gp, X)
    assert np.all(sd_data <= sd_far)
    assert np.all(gp_predict(gp, grid)[1] >= 0)


def test_gp_translation(rng):
    X = rng.random((7, 2))
    y = rng.random(7)
    probe = rng.random((20, 2))
    a, sa = gp_predict(gp_fit(X, y), probe)
    b, sb = gp_predict(gp_fit(X, y + 3.0), probe)
    np.testing.assert_allclose(b, a + 3.0, atol=1e-9)
    np.testing.assert_allclose(sb, sa, atol=1e-9)


def test_gp_selected_hyperparameters_maximise_lml(rng):
    gp = gp_fit(rng.random((8, 3)), rng.random(8))
    assert gp.lml == max(t[2] for t in gp.fit_trace)
    assert len(gp.fit_trace) == 28


def test_gp_duplicates_with_different_targets():
    X = np.array([[0.5], [0.5], [0.2]])
    gp = gp_fit(X, [0.1, 0.3, 0.9])
    mu, sd = gp_predict(gp, [0.5])
    assert np.isfinite(mu) and sd >= 0


def test_gp_errors():
    with pytest.raises(ValueError):
        gp_fit([[0.1]], [1.0])
    gp = gp_fit([[0.1], [0.9]], [0.0, 1.0])
    with pytest.raises(ValueError):
        gp_predict(gp, [0.1, 0.2])


def test_lcb_examples():
    assert acquisition_lcb(0.3, 0.1) == pytest.approx(0.2)
    assert acquisition_lcb(0.42, 0.0) == 0.42
    assert acquisition_lcb(0.5, 0.2) < acquisition_lcb(0.5, 0.1)


def test_proposal_in_bounds_and_new(rng):
    space = param_space("gboost", 5)
    recs, U = lhd_init(space, 10, 1, return_unit=True)
    gp = gp_fit(U, rng.random(10))
    for s in range(10):
        p = propose_next(gp, space, s)
        assert all(d.contains(p[d.name]) for d in space)
        assert p not in recs


def test_proposal_never_repeats_on_tiny_grid():
    space = [ParamDomain("k", "integer", 1, 3)]
    seen = np.array([[encode(space, {"k": 1})[0]], [encode(space, {"k": 2})[0]]])
    gp = gp_fit(seen, [0.1, 0.5])
    for s in range(20):
        assert propose_next(gp, space, s) == {"k": 3}


def test_proposal_finds_superior_half():
    hits = 0
    for s in range(100):
        r = np.random.default_rng([s, 3])
        x = np.sort(r.random(8))[:, None]
        err = np.where(x[:, 0] > 0.5, 0.1 + 0.1 * (x[:, 0] - 0.75) ** 2, 0.4)
        gp = gp_fit(x, err)
        hits += propose_next(gp, UNIT, s)["x"] > 0.5
    assert hits >= 95


def test_cv_objective_separable(separable):
    X, y = separable
    X = X.copy()
    X[:, 0] += np.where(y == 1, 2.0, -2.0)
    plan = stratified_repeated_kfold(y, 10, 10, 0)
    mean, std, scores = cv_objective("logreg", {"C": 10.0}, (X, y), plan)
    assert mean >= 0.99
    assert len(scores) == 100
    assert std == pytest.approx(np.std(scores, ddof=1), rel=1e-12)
    assert cv_objective("logreg", {"C": 10.0}, (X, y), plan)[0] == mean


def test_cv_objective_failed_fold_scores_prior(caplog):
    X = np.zeros((20, 2))
    y = np.array([0] * 14 + [1] * 6)
    plan = stratified_repeated_kfold(y, 2, 1, 0)
    # a bogus value only raises at training time inside each fold
    mean, _, scores = cv_objective("gboost", {"learning_rate": -1.0}, (X, y), plan)
    assert np.all(scores == 0.7)
    assert "failed" in caplog.text


def _toy(params):
    return 1.0 - (params["x"] - 0.3) ** 2, 0.01


def test_bayes_trace_length_and_best():
    tr = bayes_optimize(_toy, UNIT, 10, 25, seed=2)
    assert len(tr) == 35
    assert [e.source for e in tr.entries].count("lhd") == 10
    assert tr.best.mean == tr.means.max()


def test_best_tie_breaks():
    from cohortxai.tuning import TraceEntry

    tr = TuneTrace([TraceEntry({"x": 0}, 0.8, 0.1), TraceEntry({"x": 1}, 0.8, 0.05),
                    TraceEntry({"x": 2}, 0.8, 0.05), TraceEntry({"x": 3}, 0.7, 0.0)])
    assert tr.best_index == 1


def test_bayes_reproducible_and_resumable(tmp_path):
    full = bayes_optimize(_toy, UNIT, 5, 6, seed=4)
    assert bayes_optimize(_toy, UNIT, 5, 6, seed=4).to_jsonl() == full.to_jsonl()
    partial = TuneTrace(full.entries[:7], UNIT)
    path = tmp_path / "trace.jsonl"
    partial.write(path)
    resumed = bayes_optimize(_toy, UNIT, 5, 6, seed=4, resume=TuneTrace.read(path, UNIT))
    assert resumed.to_jsonl() == full.to_jsonl()


def test_tune_on_dataset_tuple(separable):
    X, y = separable
    plan = stratified_repeated_kfold(y, 3, 1, 0)
    seen = []
    tr = tune("svm_radial", (X, y), init=3, iters=2, fold_plan=plan, on_entry=seen.append)
    assert len(tr) == 5 == len(seen)
    assert tr.best.mean >= 0.8
