"""Tests for src/regress.py: OLS, Ridge, Lasso and the random forest"""

import numpy as np
import pytest

from src.errors import NoConvergence, ParamError, ShapeError
from src.regress import (ConstantModel, ForestModel, ForestParams, LinearModel, PenaltyKind, TreeLeaf,
                         fit_forest, fit_lasso, fit_mean, fit_ols, fit_ridge, lambda_max, predict,
                         ridge_coefficients, soft_threshold)


def _random_problem(seed, n=50, d=4):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = X @ rng.normal(size=d) + 0.5 + rng.normal(scale=0.2, size=n)
    return X, y


def assert_kkt(X, y, model, tol=1e-6):
    """Stationarity of the (1/2n) Lasso objective at the fitted coefficients"""
    n = X.shape[0]
    residual = y - model.intercept - X @ model.coefficients
    gradient = X.T @ residual / n
    lam = model.penalty.strength
    for g, b in zip(gradient, model.coefficients):
        if b != 0.0:
            assert g == pytest.approx(lam * np.sign(b), abs=tol)
        else:
            assert abs(g) <= lam + tol


class TestOls:
    def test_exact_line(self):
        model = fit_ols([[1.0], [2.0], [3.0]], [3.0, 5.0, 7.0])
        assert model.intercept == pytest.approx(1.0)
        np.testing.assert_allclose(model.coefficients, [2.0])

    def test_constant_target(self):
        model = fit_ols([[1.0], [2.0], [3.0]], [4.0, 4.0, 4.0])
        assert model.intercept == pytest.approx(4.0)
        np.testing.assert_allclose(model.coefficients, [0.0], atol=1e-12)

    def test_normal_equations_oracle(self):
        X, y = _random_problem(0)
        A = np.column_stack([np.ones(len(y)), X])
        oracle = np.linalg.solve(A.T @ A, A.T @ y)
        model = fit_ols(X, y)
        np.testing.assert_allclose(np.r_[model.intercept, model.coefficients], oracle, atol=1e-8)
        assert model.penalty.kind is PenaltyKind.NONE

    def test_needs_more_rows(self):
        with pytest.raises(ShapeError):
            fit_ols([[1.0, 2.0], [3.0, 4.0]], [1.0, 2.0])


class TestRidge:
    def test_zero_penalty_is_ols(self):
        X, y = _random_problem(1)
        ridge, ols = fit_ridge(X, y, 0.0), fit_ols(X, y)
        np.testing.assert_allclose(ridge.coefficients, ols.coefficients, atol=1e-9)
        assert ridge.intercept == pytest.approx(ols.intercept, abs=1e-9)

    def test_hand_solved_no_intercept(self):
        beta = ridge_coefficients([[1.0], [2.0], [3.0]], [1.0, 2.0, 3.0], 1.0)
        assert beta[0] == pytest.approx(14 / 15)

    def test_heavy_shrinkage(self):
        X, y = _random_problem(2)
        assert np.all(np.abs(fit_ridge(X, y, 1e6).coefficients) < 1e-3)

    def test_norm_non_increasing(self):
        X, y = _random_problem(3)
        norms = [np.linalg.norm(fit_ridge(X, y, lam).coefficients) for lam in np.logspace(-3, 2, 10)]
        assert all(b <= a + 1e-12 for a, b in zip(norms, norms[1:]))

    def test_negative_penalty(self):
        X, y = _random_problem(4)
        with pytest.raises(ParamError):
            fit_ridge(X, y, -1.0)


class TestLasso:
    def test_soft_threshold(self):
        assert soft_threshold(1.0, 0.4) == pytest.approx(0.6)
        assert soft_threshold(-1.0, 0.4) == pytest.approx(-0.6)
        assert soft_threshold(0.3, 0.4) == 0.0

    def test_above_lambda_max_is_zero(self):
        X, y = _random_problem(5)
        model = fit_lasso(X, y, 1.01 * lambda_max(X, y))
        assert np.all(model.coefficients == 0.0)
        assert model.intercept == pytest.approx(y.mean())

    def test_exactly_lambda_max_is_zero(self):
        for seed in range(200):
            X, y = _random_problem(seed, n=int(10 + seed % 41), d=int(2 + seed % 7))
            model = fit_lasso(X, y, lambda_max(X, y))
            assert np.all(model.coefficients == 0.0), seed

    def test_orthonormal_closed_form(self):
        X = np.array([[1.0, 1.0], [-1.0, 1.0], [1.0, -1.0], [-1.0, -1.0]])
        y = X @ [1.0, 0.5]
        model = fit_lasso(X, y, 0.4)
        np.testing.assert_allclose(model.coefficients, [0.6, 0.1], atol=1e-12)
        assert_kkt(X, y, model)

    def test_vanishing_penalty_matches_ols(self):
        X, y = _random_problem(6)
        np.testing.assert_allclose(fit_lasso(X, y, 1e-10).coefficients, fit_ols(X, y).coefficients, atol=1e-5)

    @pytest.mark.parametrize("fraction", [0.05, 0.2, 0.5, 0.9])
    def test_kkt(self, fraction):
        X, y = _random_problem(7, n=40, d=6)
        model = fit_lasso(X, y, fraction * lambda_max(X, y))
        assert model.penalty.kind is PenaltyKind.L1
        assert model.n_iter >= 1
        assert_kkt(X, y, model)

    def test_no_convergence(self):
        X, y = _random_problem(8)
        with pytest.raises(NoConvergence) as info:
            fit_lasso(X, y, 0.01, max_iter=1)
        assert info.value.iterations == 1

    def test_non_positive_penalty(self):
        X, y = _random_problem(9)
        with pytest.raises(ParamError):
            fit_lasso(X, y, 0.0)


class TestForest:
    def test_constant_target(self):
        X = np.random.default_rng(0).normal(size=(20, 3))
        model = fit_forest(X, np.full(20, 4.0), ForestParams(n_trees=5))
        np.testing.assert_array_equal(predict(model, X), np.full(20, 4.0))
        np.testing.assert_array_equal(model.importances, np.zeros(3))

    def test_single_tree_memorises(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(30, 3))
        y = rng.normal(size=30)
        model = fit_forest(X, y, ForestParams(n_trees=1, bootstrap=False, features_per_split=3))
        np.testing.assert_allclose(predict(model, X), y, atol=1e-12)

    def test_relevant_feature_dominates(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(500, 2))
        model = fit_forest(X, 3.0 * X[:, 0], ForestParams(n_trees=20, features_per_split=2, seed=3))
        assert model.importances[0] > 0.9
        assert model.importances.sum() == pytest.approx(1.0, abs=1e-9)

    def test_deterministic_refit(self):
        X, y = _random_problem(10, n=80)
        params = ForestParams(n_trees=8, seed=5)
        np.testing.assert_array_equal(predict(fit_forest(X, y, params), X), predict(fit_forest(X, y, params), X))

    def test_parallel_matches_serial(self):
        X, y = _random_problem(11, n=60)
        serial = fit_forest(X, y, ForestParams(n_trees=6, seed=2, n_jobs=1))
        parallel = fit_forest(X, y, ForestParams(n_trees=6, seed=2, n_jobs=2))
        np.testing.assert_array_equal(predict(serial, X), predict(parallel, X))
        np.testing.assert_array_equal(serial.importances, parallel.importances)

    def test_predictions_within_target_range(self):
        X, y = _random_problem(12, n=60)
        model = fit_forest(X, y, ForestParams(n_trees=10, max_depth=3, min_samples_leaf=2))
        preds = predict(model, np.random.default_rng(13).normal(scale=3.0, size=(40, 4)))
        assert preds.min() >= y.min() and preds.max() <= y.max()

    def test_depth_zero_is_mean_of_bootstrap(self):
        X, y = _random_problem(14, n=30)
        model = fit_forest(X, y, ForestParams(n_trees=1, max_depth=0, bootstrap=False))
        np.testing.assert_allclose(predict(model, X), np.full(30, y.mean()))

    @pytest.mark.parametrize("kwargs", [{"n_trees": 0}, {"min_samples_leaf": 0},
                                        {"features_per_split": 0}, {"seed": -1}])
    def test_invalid_params(self, kwargs):
        with pytest.raises(ParamError):
            ForestParams(**kwargs)


class TestPredict:
    def test_linear(self):
        model = LinearModel(intercept=1.0, coefficients=np.array([2.0]))
        np.testing.assert_allclose(predict(model, [[3.0]]), [7.0])

    def test_identical_stumps(self):
        model = ForestModel(trees=(TreeLeaf(5.0, 1),) * 3, importances=np.zeros(2),
                            params=ForestParams(n_trees=3), n_features_in=2)
        np.testing.assert_array_equal(predict(model, np.zeros((4, 2))), np.full(4, 5.0))

    def test_mean_model(self):
        model = fit_mean([[1.0], [2.0]], [3.0, 5.0])
        assert isinstance(model, ConstantModel)
        np.testing.assert_array_equal(predict(model, [[0.0], [9.0]]), [4.0, 4.0])

    def test_width_mismatch(self):
        model = LinearModel(intercept=0.0, coefficients=np.array([1.0, 2.0]))
        with pytest.raises(ShapeError):
            predict(model, [[1.0]])
