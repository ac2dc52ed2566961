import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _support import random_gaussian, random_spd
from coopaoa.gaussian import Gaussian, NumericalError, kalman_update, sigma_points

seeds = st.integers(min_value=0, max_value=2**32 - 1)
dims = st.integers(min_value=1, max_value=7)


class TestGaussianType:
    def test_rejects_asymmetric(self):
        with pytest.raises(NumericalError):
            Gaussian([0, 0], [[1.0, 0.5], [0.0, 1.0]])

    def test_rejects_indefinite(self):
        with pytest.raises(NumericalError):
            Gaussian([0, 0], [[1.0, 0.0], [0.0, -0.1]])

    def test_rejects_shape_mismatch(self):
        with pytest.raises(ValueError):
            Gaussian([0, 0, 0], np.eye(2))

    def test_rejects_nan_mean(self):
        with pytest.raises(NumericalError):
            Gaussian([np.nan], [[1.0]])

    def test_block_product(self):
        g = Gaussian.block_product(Gaussian([1.0], [[2.0]]), Gaussian([3.0, 4.0], np.eye(2)))
        np.testing.assert_array_equal(g.mean, [1, 3, 4])
        np.testing.assert_array_equal(g.cov, np.diag([2.0, 1, 1]))


class TestSigmaPoints:
    def test_one_dim_closed_form(self):
        s = sigma_points(Gaussian([0.0], [[1.0]]), kappa=2.0)
        np.testing.assert_allclose(np.sort(s.points[:, 0]), [-np.sqrt(3), 0, np.sqrt(3)], atol=1e-15)
        np.testing.assert_allclose(s.weights, [2 / 3, 1 / 6, 1 / 6], atol=1e-15)

    def test_default_kappa_one_dim_matches(self):
        s = sigma_points(Gaussian([0.0], [[1.0]]))
        np.testing.assert_allclose(s.weights, [2 / 3, 1 / 6, 1 / 6])

    def test_identity_six_dim(self):
        s = sigma_points(Gaussian(np.zeros(6), np.eye(6)))
        assert s.points.shape == (13, 6)
        np.testing.assert_allclose(s.cov(), np.eye(6), atol=1e-12)

    @given(seeds, dims)
    def test_moment_matching(self, seed, d):
        rng = np.random.default_rng(seed)
        g = random_gaussian(rng, d)
        s = sigma_points(g)
        assert abs(s.weights.sum() - 1) < 1e-12
        np.testing.assert_allclose(s.mean(), g.mean, atol=1e-9 * (1 + np.abs(g.mean).max()))
        np.testing.assert_allclose(s.cov(), g.cov, atol=1e-9 * np.abs(g.cov).max())

    def test_bad_kappa(self):
        with pytest.raises(ValueError):
            sigma_points(Gaussian([0.0], [[1.0]]), kappa=-1.0)


class TestKalmanUpdate:
    def test_equal_precision_fusion(self):
        g = kalman_update(Gaussian([0.0], [[1.0]]), [[1.0]], [2.0], [[1.0]])
        assert g.mean[0] == pytest.approx(1.0)
        assert g.cov[0, 0] == pytest.approx(0.5)

    def test_uninformative_measurement(self):
        rng = np.random.default_rng(1)
        prior = random_gaussian(rng, 3)
        g = kalman_update(prior, rng.standard_normal((2, 3)), [1.0, -1.0], 1e12 * np.eye(2))
        assert g.allclose(prior, atol=1e-6)

    def test_partial_observation(self):
        g = kalman_update(Gaussian([0.0, 0.0], np.eye(2)), [[1.0, 0.0]], [3.0], [[1.0]])
        np.testing.assert_allclose(g.mean, [1.5, 0.0])
        np.testing.assert_allclose(g.cov, np.diag([0.5, 1.0]))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            kalman_update(Gaussian([0.0, 0.0], np.eye(2)), [[1.0, 0.0, 0.0]], [3.0], [[1.0]])

    def test_wrapped_innovation(self):
        # innovation of 2*pi - 0.2 wraps to -0.2
        g = kalman_update(Gaussian([0.1], [[1.0]]), [[1.0]], [0.1 + 2 * np.pi - 0.2], [[1.0]], wrap=[True])
        assert g.mean[0] == pytest.approx(0.0)

    @given(seeds, dims, st.integers(min_value=1, max_value=4))
    @settings(max_examples=100)
    def test_psd_and_shrinking(self, seed, d, m):
        rng = np.random.default_rng(seed)
        prior = random_gaussian(rng, d)
        g = kalman_update(prior, rng.standard_normal((m, d)), rng.standard_normal(m), random_spd(rng, m))
        assert np.all(np.diag(g.cov) <= np.diag(prior.cov) + 1e-12)
        np.testing.assert_array_equal(g.cov, g.cov.T)
        assert np.linalg.eigvalsh(g.cov).min() >= -1e-9 * np.trace(g.cov)

    @given(seeds, dims)
    @settings(max_examples=100)
    def test_order_invariance(self, seed, d):
        rng = np.random.default_rng(seed)
        prior = random_gaussian(rng, d)
        obs = [(rng.standard_normal((2, d)), rng.standard_normal(2), random_spd(rng, 2)) for _ in range(2)]
        a = kalman_update(kalman_update(prior, *obs[0]), *obs[1])
        b = kalman_update(kalman_update(prior, *obs[1]), *obs[0])
        H = np.vstack([obs[0][0], obs[1][0]])
        z = np.concatenate([obs[0][1], obs[1][1]])
        R = np.zeros((4, 4))
        R[:2, :2], R[2:, 2:] = obs[0][2], obs[1][2]
        joint = kalman_update(prior, H, z, R)
        assert a.allclose(b, atol=1e-9 * (1 + np.abs(prior.mean).max()))
        assert a.allclose(joint, atol=1e-9 * (1 + np.abs(prior.mean).max()))

    def test_ill_conditioned_innovation_is_jittered(self):
        prior = Gaussian([0.0, 0.0], np.diag([1e-16, 1e-16]))
        g = kalman_update(prior, np.eye(2), [1.0, 1.0], np.diag([1e-16, 1e-16]))
        assert np.all(np.isfinite(g.mean))
