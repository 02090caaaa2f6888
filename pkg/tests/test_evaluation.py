import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from densforest import (
    EPSILON,
    EvalReport,
    ForestConfig,
    MetricError,
    SyntheticSpec,
    anll,
    anll_values,
    eval_forest,
    kfold_anll,
    mae,
    sample_synthetic,
    true_density,
)
from densforest.evaluation import kfold_assignment


def const(v):
    return lambda x: np.full(np.atleast_2d(x).shape[0], v)


class TestMae:
    def test_identity(self):
        spec = SyntheticSpec("type1", 1)
        pts = sample_synthetic(spec, 500, np.random.default_rng(0))
        truth = lambda x: true_density(spec, x)
        assert mae(truth, truth, pts) == 0.0

    def test_constant_gap(self):
        pts = np.random.default_rng(1).random((200, 1))
        assert mae(const(0.0), const(1.0), pts) == 1.0

    def test_nonnegative(self):
        pts = np.random.default_rng(2).random((50, 2))
        rng = np.random.default_rng(3)
        f = lambda x: rng.random(np.atleast_2d(x).shape[0])
        assert mae(f, const(0.3), pts) >= 0.0

    def test_non_finite_estimator_rejected(self):
        pts = np.random.default_rng(4).random((10, 1))
        with pytest.raises(MetricError, match="non-finite density"):
            mae(const(np.inf), const(1.0), pts)


class TestAnll:
    def test_unit_density(self):
        pts = np.zeros((10, 1))
        assert anll(const(1.0), pts) == pytest.approx(0.0, abs=1e-15)

    def test_zero_density_hits_guard(self):
        pts = np.zeros((7, 1))
        assert anll(const(0.0), pts) == pytest.approx(-math.log(EPSILON), abs=1e-9)
        assert anll(const(0.0), pts) == pytest.approx(36.04365338911715, abs=1e-6)

    def test_e_values(self):
        assert anll_values([math.e, math.e]) == pytest.approx(-1.0, abs=1e-12)

    def test_order_invariant(self):
        vals = np.random.default_rng(5).random(100)
        assert anll_values(vals) == anll_values(vals[::-1])

    def test_strictly_monotone(self):
        vals = np.random.default_rng(6).random(20)
        base = anll_values(vals)
        for j in (0, 7, 19):
            bumped = vals.copy()
            bumped[j] += 0.5
            assert anll_values(bumped) < base

    @given(arrays(float, st.integers(1, 40),
                  elements=st.floats(0.0, 1e300, allow_nan=False)))
    @settings(max_examples=100, deadline=None)
    def test_always_finite(self, vals):
        assert math.isfinite(anll_values(vals))


class TestKfold:
    def test_symmetric_halves_score_equally(self):
        n, folds, seed = 100, 2, 13
        config = ForestConfig(m=2, k=2, p=8, t=10, cv_folds=5, seed=seed)
        fold_of = kfold_assignment(n, folds, seed)
        block = sample_synthetic(SyntheticSpec("type1", 1), n // 2,
                                 np.random.default_rng(3))
        data = np.empty((n, 1))
        data[fold_of == 0] = block
        data[fold_of == 1] = block
        result = kfold_anll(data, config, folds=folds)
        assert result.per_fold[0] == result.per_fold[1]

    def test_replay_from_serialized_models(self):
        data = sample_synthetic(SyntheticSpec("type1", 1), 300, np.random.default_rng(8))
        config = ForestConfig(m=2, k=2, p=8, t=10, cv_folds=5, seed=4)
        result = kfold_anll(data, config, folds=3, return_models=True)
        from densforest import Forest
        for f, model in enumerate(result.models):
            clone = Forest.from_json(model.to_json())
            test = data[result.fold_of == f]
            replayed = anll(lambda x: eval_forest(clone, x), test)
            assert abs(replayed - result.per_fold[f]) <= 1e-12
        assert result.mean == pytest.approx(np.mean(result.per_fold), abs=1e-15)

    def test_preconditions(self):
        config = ForestConfig(m=1, k=1, p=4, cv_folds=2, seed=0)
        with pytest.raises(ValueError):
            kfold_anll(np.zeros((1, 1)), config, folds=2)
        with pytest.raises(ValueError):
            kfold_anll(np.zeros((10, 1)), config, folds=1)

    def test_forest_beats_kde_on_quantized_tabular_data(self):
        # wine-like stand-in at desk scale: skewed, correlated, coarsely
        # quantized columns with outliers; adaptive cells concentrate mass
        # where Scott-bandwidth KDE oversmooths
        rng = np.random.default_rng(1)
        n, d = 800, 8
        latent = rng.normal(size=(n, 3))
        mix = rng.normal(size=(3, d)) * 0.8
        X = np.exp(0.4 * (latent @ mix + 0.6 * rng.normal(size=(n, d))))
        X += rng.exponential(0.2, size=(n, d)) * (rng.random((n, d)) < 0.03) * 20
        steps = np.array([0.1, 0.01, 0.01, 0.1, 0.001, 1.0, 1.0, 0.01])
        X = np.round(X / steps) * steps

        pp = {"discrete_threshold": 10, "corr_threshold": 0.98}
        config = ForestConfig(m=5, k=3, p=512, t=30, cv_folds=5, seed=3, margin=0.1)
        forest_score = kfold_anll(X, config, folds=5, preprocess_opts=pp).mean

        from densforest import apply_preprocess, eval_kde, fit_kde, fit_preprocess
        fold_of = kfold_assignment(n, 5, 3)
        kde_scores = []
        for f in range(5):
            val = fold_of == f
            state = fit_preprocess(X[~val], np.arange(int((~val).sum())), **pp)
            model = fit_kde(apply_preprocess(state, X[~val]))
            kde_scores.append(anll(lambda x: eval_kde(model, x),
                                   apply_preprocess(state, X[val])))
        assert forest_score < np.mean(kde_scores)


class TestEvalReport:
    def test_json_line_round_trips(self):
        import json
        report = EvalReport(metric="anll", value=1.25, n_test=10,
                            config={"seed": 3, "p": 8}, epsilon_used=EPSILON)
        doc = json.loads(report.to_json_line())
        assert doc["metric"] == "anll"
        assert doc["value"] == 1.25
        assert doc["fingerprint"] == report.fingerprint

    def test_fingerprint_tracks_config(self):
        a = EvalReport(metric="mae", value=0.0, n_test=1, config={"p": 8})
        b = EvalReport(metric="mae", value=0.0, n_test=1, config={"p": 16})
        c = EvalReport(metric="mae", value=9.9, n_test=5, config={"p": 8})
        assert a.fingerprint != b.fingerprint
        assert a.fingerprint == c.fingerprint
