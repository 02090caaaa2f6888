import math

import numpy as np
import pytest

from densforest import eval_kde, fit_kde, scott_factor


class TestFit:
    def test_scott_factor(self):
        data = np.random.default_rng(0).normal(size=(100, 1))
        model = fit_kde(data)
        assert model.factor == pytest.approx(100 ** (-1 / 5))
        assert model.factor == pytest.approx(0.398, abs=1e-3)
        assert scott_factor(100, 1) == model.factor

    def test_factor_override_scales_bandwidth(self):
        data = np.random.default_rng(1).normal(size=(200, 2))
        cov = np.cov(data, rowvar=False, ddof=1)
        model = fit_kde(data, factor_override=0.5)
        assert np.allclose(model.bandwidth, 0.25 * cov)

    def test_singular_covariance_falls_back(self):
        rng = np.random.default_rng(2)
        col = rng.normal(size=(50, 1))
        data = np.hstack([col, col])  # duplicated column -> singular covariance
        model = fit_kde(data)
        assert model.diagonal_fallback
        assert np.isfinite(eval_kde(model, data[:5])).all()

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            fit_kde(np.array([[1.0]]))


class TestEval:
    def test_single_kernel_peak(self):
        # two coincident points: density at the point is the normal peak
        data = np.array([[2.0], [2.0], [2.0]])
        # zero variance -> diagonal fallback with floored variance
        model = fit_kde(data)
        h = math.sqrt(model.bandwidth[0, 0])
        assert eval_kde(model, np.array([2.0])) == pytest.approx(1 / (math.sqrt(2 * math.pi) * h))

    def test_peak_formula_nondegenerate(self):
        data = np.array([[0.0], [10.0]])
        model = fit_kde(data, factor_override=1.0)
        h = math.sqrt(model.bandwidth[0, 0])
        expect = (1.0 + math.exp(-0.5 * (10 / h) ** 2)) / (2 * math.sqrt(2 * math.pi) * h)
        assert eval_kde(model, np.array([0.0])) == pytest.approx(expect, rel=1e-12)

    def test_integrates_to_one_1d(self):
        data = np.random.default_rng(3).normal(size=(50, 1))
        model = fit_kde(data)
        lo, hi = data.min() - 8, data.max() + 8
        grid = np.linspace(lo, hi, 20001)[:, None]
        vals = eval_kde(model, grid)
        assert np.trapezoid(vals, grid[:, 0]) == pytest.approx(1.0, abs=1e-4)

    def test_integrates_to_one_2d(self):
        data = np.random.default_rng(4).normal(size=(30, 2))
        model = fit_kde(data)
        axis = np.linspace(-8, 8, 201)
        gx, gy = np.meshgrid(axis, axis, indexing="ij")
        pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
        vals = eval_kde(model, pts).reshape(201, 201)
        total = np.trapezoid(np.trapezoid(vals, axis, axis=1), axis)
        assert total == pytest.approx(1.0, abs=1e-3)

    def test_symmetry(self):
        a = 1.3
        data = np.array([[-a], [a]])
        model = fit_kde(data, factor_override=0.7)
        h = math.sqrt(model.bandwidth[0, 0])
        phi = math.exp(-0.5 * (a / h) ** 2) / (math.sqrt(2 * math.pi) * h)
        assert eval_kde(model, np.array([0.0])) == pytest.approx(phi, rel=1e-12)

    def test_translation_equivariance(self):
        rng = np.random.default_rng(5)
        data = rng.normal(size=(40, 3))
        shift = np.array([5.0, -2.0, 11.0])
        q = rng.normal(size=(10, 3))
        a = eval_kde(fit_kde(data), q)
        b = eval_kde(fit_kde(data + shift), q + shift)
        assert np.abs(a - b).max() <= 1e-12

    def test_nonnegative(self):
        data = np.random.default_rng(6).normal(size=(20, 2))
        model = fit_kde(data)
        pts = np.random.default_rng(7).normal(size=(500, 2)) * 5
        assert (eval_kde(model, pts) >= 0).all()
