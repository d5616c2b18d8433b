"""Tests for additive Laplace and Gaussian mechanisms."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from cdp.core.errors import DimensionMismatchError, InvalidBudgetError, InvalidScaleError
from cdp.mechanisms.noise import (
    InvalidSensitivityError,
    NoiseKind,
    NoiseSpec,
    PrivacyParams,
    QuerySpec,
    calibrate_gaussian,
    calibrate_laplace,
    density,
    gaussian_delta_on_grid,
    log_density,
    sample_additive,
    sample_noise,
)


class TestCalibration:
    @pytest.mark.parametrize(
        "delta1, epsilon, expected",
        [(1.0, 0.5, 2.0), (1.0, 1.0, 1.0), (2.0, 2.0, 1.0)],
    )
    def test_laplace(self, delta1, epsilon, expected):
        assert calibrate_laplace(delta1, epsilon) == expected

    def test_laplace_rejects_zero_sensitivity(self):
        with pytest.raises(InvalidSensitivityError):
            calibrate_laplace(0.0, 1.0)

    def test_laplace_rejects_zero_epsilon(self):
        with pytest.raises(InvalidBudgetError):
            calibrate_laplace(1.0, 0.0)

    @pytest.mark.parametrize("delta2, epsilon", [(1.0, 1.0), (2.0, 2.0)])
    def test_gaussian_at_delta_one_over_e(self, delta2, epsilon):
        sigma = calibrate_gaussian(delta2, PrivacyParams(epsilon, 1.0 / math.e))
        assert sigma == pytest.approx(1.0 + math.sqrt(2.0), rel=1e-12)

    def test_gaussian_meets_delta_on_grid(self):
        sigma = calibrate_gaussian(1.0, PrivacyParams(1.0, 0.05))
        assert gaussian_delta_on_grid(sigma, 1.0, 1.0) <= 0.05

    def test_classical_gaussian(self):
        sigma = calibrate_gaussian(1.0, PrivacyParams(1.0, 0.05), classical=True)
        assert sigma == pytest.approx(math.sqrt(2.0 * math.log(25.0)), rel=1e-12)
        assert gaussian_delta_on_grid(sigma, 1.0, 1.0) <= 0.05

    def test_gaussian_needs_positive_delta(self):
        with pytest.raises(InvalidBudgetError):
            calibrate_gaussian(1.0, PrivacyParams(1.0, 0.0))

    @pytest.mark.parametrize("epsilon, delta", [(0.0, 0.0), (-1.0, 0.0), (1.0, 1.0), (1.0, -0.1)])
    def test_privacy_params_validation(self, epsilon, delta):
        with pytest.raises(InvalidBudgetError):
            PrivacyParams(epsilon, delta)

    def test_counting_query(self):
        q = QuerySpec.counting(3, eval=lambda records: np.bincount(records, minlength=3))
        assert q.l1_sensitivity == q.l2_sensitivity == 1.0
        np.testing.assert_array_equal(q(np.array([0, 2, 2])), [1, 0, 2])


class TestNoiseSpec:
    @pytest.mark.parametrize("scale, dim", [(0.0, 3), (-1.0, 3), (1.0, 0), (math.inf, 2)])
    def test_invalid(self, scale, dim):
        with pytest.raises(InvalidScaleError):
            NoiseSpec(NoiseKind.LAPLACE, scale, dim)

    def test_variance(self):
        assert NoiseSpec.laplace(2.0, 1).coordinate_variance == 8.0
        assert NoiseSpec.gaussian(2.0, 1).coordinate_variance == 4.0


class TestSampling:
    def test_seeded_determinism(self):
        noise = NoiseSpec.laplace(1.0, 5)
        a = sample_additive(np.arange(5.0), noise, seed=11)
        b = sample_additive(np.arange(5.0), noise, seed=11)
        assert a.tobytes() == b.tobytes()

    def test_shift_equivariance(self):
        noise = NoiseSpec.laplace(1.5, 4)
        v = np.array([10.0, -3.0, 0.5, 7.0])
        diff = sample_additive(v, noise, seed=3) - sample_additive(np.zeros(4), noise, seed=3)
        np.testing.assert_allclose(diff, v, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            sample_additive(np.zeros(3), NoiseSpec.laplace(1.0, 4), seed=0)

    def test_batch_shape(self):
        out = sample_noise(NoiseSpec.gaussian(1.0, 3), seed=0, size=7)
        assert out.shape == (7, 3)

    @pytest.mark.slow
    def test_laplace_moments(self):
        u = sample_noise(NoiseSpec.laplace(1.0, 2), seed=2024, size=10 ** 6)
        assert np.all(np.abs(u.mean(axis=0)) < 0.01)
        np.testing.assert_allclose(u.var(axis=0), 2.0, rtol=0.02)

    def test_laplace_moments_quick(self):
        u = sample_noise(NoiseSpec.laplace(1.0, 1), seed=5, size=10 ** 5)
        assert abs(u.mean()) < 0.03
        assert u.var() == pytest.approx(2.0, rel=0.05)


class TestDensity:
    def test_origin(self):
        lam = 0.7
        assert density(NoiseSpec.laplace(lam, 3), np.zeros(3)) == pytest.approx((1 / (2 * lam)) ** 3)

    def test_substitution(self):
        assert density(NoiseSpec.laplace(1.0, 3), [1.0, 1.0, -2.0]) == pytest.approx(math.exp(-4) / 8)

    def test_batch(self):
        u = np.array([[0.0, 0.0], [1.0, -1.0]])
        out = density(NoiseSpec.laplace(1.0, 2), u)
        np.testing.assert_allclose(out, [0.25, 0.25 * math.exp(-2)])

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            density(NoiseSpec.laplace(1.0, 2), [0.0, 0.0, 0.0])

    def test_gaussian_integrates_to_one(self):
        noise = NoiseSpec.gaussian(1.3, 1)
        total, _ = integrate.quad(lambda x: density(noise, [x]), -np.inf, np.inf)
        assert total == pytest.approx(1.0, abs=1e-6)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(min_value=-20, max_value=20), min_size=3, max_size=3))
    def test_symmetric_and_positive(self, u):
        noise = NoiseSpec.laplace(2.0, 3)
        d = density(noise, u)
        assert d > 0
        assert d == pytest.approx(density(noise, [-x for x in u]), rel=1e-12)


class TestPrivacyRatio:
    def test_laplace_ratio_one_dimension(self):
        eps = 0.5
        noise = NoiseSpec.laplace(calibrate_laplace(1.0, eps), 1)
        grid = np.linspace(-30, 30, 2001)[:, np.newaxis]
        ratio = log_density(noise, grid) - log_density(noise, grid - 1.0)
        assert np.abs(ratio).max() <= eps + 1e-12

    def test_laplace_ratio_three_dimensions(self):
        eps = 1.0
        noise = NoiseSpec.laplace(calibrate_laplace(1.0, eps), 3)
        axis = np.linspace(-5, 5, 21)
        grid = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
        shift = np.array([0.5, -0.25, 0.25])  # L1 norm 1
        ratio = log_density(noise, grid) - log_density(noise, grid - shift)
        assert np.abs(ratio).max() <= eps + 1e-12
