import numpy as np
import pytest

from rpiv.exceptions import EstimationError
from rpiv.twostage import fit_ols, fit_tsls

from conftest import random_iv_instance


def two_stage_oracle(y, x, z):
    """Literal two-stage construction: project x onto the column space of
    z, then run OLS of y on the fitted values.  Independent of the
    moment-matrix path used by fit_tsls."""
    first, *_ = np.linalg.lstsq(z, x, rcond=None)
    fitted = z @ first
    beta, *_ = np.linalg.lstsq(fitted, y, rcond=None)
    return beta


class TestFitTsls:
    def test_exact_fit_scalar(self):
        fit = fit_tsls(np.array([2.0, 4.0]), np.array([[1.0], [2.0]]), np.array([[1.0], [2.0]]))
        assert fit.beta_hat[0] == pytest.approx(2.0, abs=1e-14)
        np.testing.assert_allclose(fit.residuals, 0.0, atol=1e-12)

    def test_orthogonal_instrument_rank_error(self):
        y = np.array([1.0, 2.0, 3.0])
        x = np.array([[1.0], [1.0], [1.0]])
        z = np.array([[1.0], [-1.0], [0.0]])
        with pytest.raises(EstimationError, match="rank condition failed"):
            fit_tsls(y, x, z)

    def test_singular_instrument_gram(self, rng):
        y = rng.normal(size=10)
        x = rng.normal(size=(10, 1))
        col = rng.normal(size=10)
        z = np.column_stack([col, col])
        with pytest.raises(EstimationError, match="instrument Gram matrix singular"):
            fit_tsls(y, x, z)

    def test_matches_two_stage_oracle(self, rng):
        y, x, z, _ = random_iv_instance(rng, 50, 2, 3)
        fit = fit_tsls(y, x, z)
        oracle = two_stage_oracle(y, x, z)
        np.testing.assert_allclose(fit.beta_hat, oracle, rtol=1e-9)

    @pytest.mark.parametrize("n,p,d", [(40, 1, 1), (60, 2, 2), (80, 3, 5)])
    def test_m_hat_left_inverse(self, rng, n, p, d):
        y, x, z, _ = random_iv_instance(rng, n, p, d)
        fit = fit_tsls(y, x, z)
        szx = z.T @ x / n
        np.testing.assert_allclose(fit.m_hat @ szx, np.eye(p), atol=1e-8)

    @pytest.mark.parametrize("n,p,d", [(40, 1, 1), (60, 2, 2), (80, 3, 5)])
    def test_m_hat_annihilates_score(self, rng, n, p, d):
        y, x, z, _ = random_iv_instance(rng, n, p, d)
        fit = fit_tsls(y, x, z)
        score = z.T @ fit.residuals / n
        scale = np.linalg.norm(z.T @ y / n)
        assert np.linalg.norm(fit.m_hat @ score) <= 1e-10 * max(scale, 1.0)

    def test_just_identified_score_zero(self, rng):
        y, x, z, _ = random_iv_instance(rng, 50, 2, 2)
        fit = fit_tsls(y, x, z)
        score = z.T @ fit.residuals / 50
        scale = np.linalg.norm(z.T @ y / 50)
        np.testing.assert_allclose(score, 0.0, atol=1e-10 * max(scale, 1.0))

    def test_scale_equivariance_power_of_two(self, rng):
        y, x, z, _ = random_iv_instance(rng, 30, 2, 3)
        base = fit_tsls(y, x, z)
        doubled = fit_tsls(2.0 * y, x, z)
        np.testing.assert_array_equal(doubled.beta_hat, 2.0 * base.beta_hat)
        np.testing.assert_array_equal(doubled.residuals, 2.0 * base.residuals)

    def test_scale_equivariance_general(self, rng):
        y, x, z, _ = random_iv_instance(rng, 30, 2, 3)
        base = fit_tsls(y, x, z)
        scaled = fit_tsls(3.7 * y, x, z)
        np.testing.assert_allclose(scaled.beta_hat, 3.7 * base.beta_hat, rtol=1e-12)

    def test_permutation_invariance(self, rng):
        y, x, z, _ = random_iv_instance(rng, 45, 2, 3)
        fit = fit_tsls(y, x, z)
        perm = rng.permutation(45)
        refit = fit_tsls(y[perm], x[perm], z[perm])
        np.testing.assert_allclose(refit.beta_hat, fit.beta_hat, rtol=1e-10)

    def test_underidentified_rejected(self, rng):
        y, x, z, _ = random_iv_instance(rng, 30, 2, 3)
        with pytest.raises(EstimationError, match="fewer instruments"):
            fit_tsls(y, x, z[:, :1])


class TestFitOls:
    def test_exact_recovery(self, rng):
        x = rng.normal(size=(20, 3))
        coef = np.array([1.5, -2.0, 0.25])
        np.testing.assert_allclose(fit_ols(x @ coef, x), coef, atol=1e-12)

    def test_orthogonal_response(self):
        x = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [-1.0, 1.0]])
        y = np.zeros(4)
        np.testing.assert_allclose(fit_ols(y, x), 0.0, atol=1e-14)

    def test_matches_pseudo_inverse_oracle(self, rng):
        x = rng.normal(size=(30, 4))
        y = rng.normal(size=30)
        oracle = np.linalg.pinv(x) @ y
        np.testing.assert_allclose(fit_ols(y, x), oracle, atol=1e-10)

    def test_residual_orthogonality(self, rng):
        x = rng.normal(size=(30, 3))
        y = rng.normal(size=30)
        res = y - x @ fit_ols(y, x)
        assert np.linalg.norm(x.T @ res / 30) <= 1e-10 * max(np.linalg.norm(y), 1.0)

    def test_singular_gram(self, rng):
        col = rng.normal(size=10)
        x = np.column_stack([col, 2.0 * col])
        with pytest.raises(EstimationError, match="design Gram matrix singular"):
            fit_ols(rng.normal(size=10), x)
