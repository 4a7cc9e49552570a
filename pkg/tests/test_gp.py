"""Tests for the squared-exponential GP building blocks."""

import numpy as np
import pytest
from scipy import stats

from monoproj.gp import (DenseGP, FactorizationError, KernelParams, LatticeGP, UnitScaler,
                         cross_gram, gram_matrix, lattice_axes, latent_conditional, predict_grid,
                         se_kernel, stable_cholesky)


class TestKernel:
    def test_value(self):
        p = KernelParams(2.0, (0.5, 3.0))
        # exp(-(0.5*1 + 3*0.04)) / 2
        assert se_kernel([0.0, 0.0], [1.0, 0.2], p) == pytest.approx(np.exp(-0.62) / 2)

    def test_gram_matches_pointwise(self, rng):
        p = KernelParams(0.7, (1.3,))
        x = rng.uniform(size=6)
        K = gram_matrix(x, p)
        for i in range(6):
            for j in range(6):
                assert K[i, j] == pytest.approx(se_kernel(x[i], x[j], p), rel=1e-12)
        assert np.allclose(K, K.T)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            cross_gram(np.zeros((2, 2)), np.zeros((2, 2)), KernelParams(1.0, (1.0,)))

    def test_params_validation(self):
        with pytest.raises(ValueError):
            KernelParams(-1.0, (1.0,))
        with pytest.raises(ValueError):
            KernelParams(1.0, (0.0,))


class TestCholesky:
    def test_no_nugget_when_positive_definite(self):
        L, nug = stable_cholesky(np.array([[2.0, 0.5], [0.5, 1.0]]))
        assert nug == 0.0
        np.testing.assert_allclose(L @ L.T, [[2, 0.5], [0.5, 1]])

    def test_nugget_escalates_for_duplicates(self):
        K = gram_matrix(np.zeros(3), KernelParams(1.0, (1.0,)))
        L, nug = stable_cholesky(K)
        assert 1e-8 <= nug <= 1e-4

    def test_gives_up(self):
        with pytest.raises(FactorizationError):
            stable_cholesky(np.array([[1.0, 0.0], [0.0, -1.0]]))


class TestConditional:
    def test_matches_textbook_formula(self, rng):
        x = np.sort(rng.uniform(size=8))
        y = rng.normal(size=8)
        p = KernelParams(1.5, (4.0,))
        K = gram_matrix(x, p)
        S = K + 0.3 ** 2 * np.eye(8)
        state = latent_conditional(y, x, p, 0.3)
        np.testing.assert_allclose(state.mean, K @ np.linalg.solve(S, y), atol=1e-10)
        np.testing.assert_allclose(state.covariance, K - K @ np.linalg.solve(S, K), atol=1e-10)

    def test_heteroscedastic(self, rng):
        x = np.linspace(0, 1, 5)
        y = rng.normal(size=5)
        p = KernelParams(1.0, (2.0,))
        sig = np.array([0.1, 1, 1, 1, 10])
        K = gram_matrix(x, p)
        state = latent_conditional(y, x, p, sig)
        np.testing.assert_allclose(state.mean, K @ np.linalg.solve(K + np.diag(sig ** 2), y), atol=1e-10)

    def test_sampling_moments(self, rng):
        x = np.linspace(0, 1, 4)
        state = latent_conditional(np.array([1.0, 0, -1, 2]), x, KernelParams(1.0, (3.0,)), 0.5)
        draws = state.sample(rng, 20000)
        np.testing.assert_allclose(draws.mean(0), state.mean, atol=0.03)
        np.testing.assert_allclose(np.cov(draws.T), state.covariance, atol=0.03)


class TestDenseGP:
    def test_log_marginal_matches_scipy(self, rng):
        x = rng.uniform(size=(7, 2))
        y = rng.normal(size=7)
        gp = DenseGP(x)
        K = gram_matrix(x, KernelParams(2.0, (1.0, 5.0)))
        ref = stats.multivariate_normal(np.zeros(7), K + 0.2 * np.eye(7)).logpdf(y)
        assert gp.log_marginal(y, 2.0, (1.0, 5.0), 0.2) == pytest.approx(ref + 3.5 * np.log(2 * np.pi))

    def test_empty(self):
        assert DenseGP(np.zeros((0, 1))).log_marginal(np.zeros(0), 1.0, (1.0,), 1.0) == 0.0


class TestLatticeGP:
    def setup_method(self):
        self.axes = [np.linspace(0, 1, 4), np.linspace(0, 1, 3)]
        S, T = np.meshgrid(*self.axes, indexing="ij")
        self.X = np.column_stack([S.ravel(), T.ravel()])

    def test_agrees_with_dense(self, rng):
        y = rng.normal(size=12)
        dense, lat = DenseGP(self.X), LatticeGP(self.axes)
        args = (y, 1.7, (2.0, 0.5), 0.3)
        assert lat.log_marginal(*args) == pytest.approx(dense.log_marginal(*args), rel=1e-10)
        for a, b in zip(lat.moments(*args), dense.moments(*args)):
            np.testing.assert_allclose(a, b, atol=1e-10)

    def test_lattice_detection_and_order(self, rng):
        perm = rng.permutation(12)
        axes, order = lattice_axes(self.X[perm])
        np.testing.assert_allclose(self.X[perm][order], self.X)
        assert lattice_axes(self.X[:-1]) is None


class TestPrediction:
    def test_interpolates_at_design(self, rng):
        x = np.linspace(0, 1, 5)
        w = rng.normal(size=5)
        out = predict_grid(w, x, x, KernelParams(1.0, (2.0,)), rng)
        np.testing.assert_allclose(out, w, atol=1e-3)

    def test_stack_shape(self, rng):
        x = np.linspace(0, 1, 5)
        w = rng.normal(size=(3, 5))
        p = [KernelParams(1.0, (2.0,)), KernelParams(2.0, (1.0,)), KernelParams(1.0, (2.0,))]
        assert predict_grid(w, x, np.linspace(0, 1, 9), p, rng).shape == (3, 9)


def test_unit_scaler_round_trip(rng):
    X = rng.normal(size=(10, 2)) * [1, 100]
    sc = UnitScaler(X)
    U = sc.transform(X)
    assert U.min() == 0 and U.max() == 1
    np.testing.assert_allclose(sc.inverse(U), X)
