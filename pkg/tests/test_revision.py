"""Tests for conditional densities, rejection sampling and constrained MH."""

import math

import numpy as np
import pytest
from scipy import integrate

from cdp.core.errors import ZeroMassError
from cdp.invariants.affine import AffineEquality, AffineInequality, contains
from cdp.invariants.hierarchy import Hierarchy, hierarchy_to_equalities
from cdp.mechanisms.noise import NoiseSpec
from cdp.revision.conditional import (
    AcceptanceTimeoutError,
    DensityCase,
    InfeasibleInvariantError,
    RejectionSampler,
    conditional_density,
    estimate_normalizer,
    invariant_mass,
    normalizing_constant,
    rejection_sample,
)
from cdp.revision.mh import (
    InfeasibleStartError,
    MHConfig,
    MHConfigError,
    batch_means_ess,
    mh_sample,
    mh_sample_affine,
    sample_conditional,
)


class TestNormalizer:
    def test_laplace_three_way_sum(self):
        k = normalizing_constant(NoiseSpec.laplace(1.0, 3), AffineEquality.sum_to(3))
        assert k == pytest.approx(3 / 16, rel=1e-4)

    @pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
    def test_laplace_two_way_sum(self, lam):
        k = normalizing_constant(NoiseSpec.laplace(lam, 2), AffineEquality.sum_to(2))
        assert k == pytest.approx(1 / (4 * lam), rel=1e-5)

    def test_gaussian_closed_form_matches_quadrature(self):
        noise = NoiseSpec.gaussian(1.0, 2)
        eq = AffineEquality.sum_to(2)
        closed = estimate_normalizer(noise, eq, method="closed_form")
        quad = estimate_normalizer(noise, eq, method="quadrature")
        assert closed.method == "closed_form"
        assert closed.value == pytest.approx(1 / (2 * math.sqrt(math.pi)), rel=1e-12)
        assert quad.value == pytest.approx(closed.value, rel=1e-5)

    def test_importance_agrees_with_quadrature(self):
        est = estimate_normalizer(
            NoiseSpec.laplace(1.0, 3), AffineEquality.sum_to(3), method="importance", seed=4
        )
        assert est.stderr > 0
        assert est.value == pytest.approx(3 / 16, rel=0.02)

    def test_unnormalized_kernel(self):
        # kernel integral over u = (v, -v) is the integral of exp(-2|v|)
        k = normalizing_constant(NoiseSpec.laplace(1.0, 2), AffineEquality.sum_to(2), normalized=False)
        assert k == pytest.approx(1.0, rel=1e-5)

    def test_closed_form_rejects_laplace(self):
        with pytest.raises(ValueError):
            estimate_normalizer(NoiseSpec.laplace(1.0, 2), AffineEquality.sum_to(2), method="closed_form")


class TestConditionalDensity:
    def test_measure_zero_integrates_to_one(self):
        cond = conditional_density(np.zeros(2), NoiseSpec.laplace(1.0, 2), AffineEquality.sum_to(2))
        assert cond.case is DensityCase.MEASURE_ZERO
        assert float(cond.evaluate_free([0.0])) == pytest.approx(1.0, rel=1e-5)
        total, _ = integrate.quad(lambda v: float(cond.evaluate_free([v])), -np.inf, np.inf, points=[0.0])
        assert total == pytest.approx(1.0, abs=1e-5)

    def test_normalizer_does_not_depend_on_query_value(self):
        noise = NoiseSpec.laplace(1.0, 3)
        eq = AffineEquality.sum_to(3)
        a = conditional_density([0.0, 0.0, 0.0], noise, eq)
        b = conditional_density([5.0, -2.0, -3.0], noise, eq)
        assert a.normalizer == b.normalizer

    def test_zero_off_the_invariant(self):
        cond = conditional_density(np.zeros(2), NoiseSpec.laplace(1.0, 2), AffineEquality.sum_to(2))
        assert cond.evaluate([1.0, 1.0]) == 0.0

    def test_infeasible_query_value(self):
        with pytest.raises(InfeasibleInvariantError):
            conditional_density([1.0, 1.0, 1.0], NoiseSpec.laplace(1.0, 3), AffineEquality.sum_to(3))

    def test_positive_mass_halfline(self):
        cond = conditional_density([0.0], NoiseSpec.laplace(1.0, 1), AffineInequality.nonnegative(1))
        assert cond.case is DensityCase.POSITIVE_MASS
        assert cond.normalizer == pytest.approx(0.5)
        assert float(cond.evaluate([1.0])) == pytest.approx(math.exp(-1.0))
        assert cond.evaluate([-1.0]) == 0.0

    def test_zero_mass(self):
        with pytest.raises(ZeroMassError):
            conditional_density([-100.0], NoiseSpec.laplace(1.0, 1), AffineInequality.nonnegative(1))

    def test_box_mass_is_analytic(self):
        est = invariant_mass(np.array([0.5, 0.5]), NoiseSpec.laplace(1.0, 2), AffineInequality.nonnegative(2))
        assert est.method == "analytic"
        assert est.value == pytest.approx((1 - 0.5 * math.exp(-0.5)) ** 2)

    def test_general_polyhedron_uses_monte_carlo(self):
        # z_1 + z_2 >= 0 around the origin has probability one half
        est = invariant_mass(np.zeros(2), NoiseSpec.laplace(1.0, 2), AffineInequality([[1.0, 1.0]], [0.0]), seed=1)
        assert est.method == "monte_carlo"
        assert est.value == pytest.approx(0.5, abs=5 * est.stderr + 1e-3)


class TestRejection:
    def test_draws_land_in_invariant(self):
        inv = AffineInequality.nonnegative(2)
        draws = rejection_sample([0.5, 0.5], NoiseSpec.laplace(1.0, 2), inv, seed=3, size=500)
        assert draws.shape == (500, 2)
        assert np.all(contains(inv, draws, tol=0.0))

    def test_acceptance_rate_estimates_mass(self):
        sampler = RejectionSampler([0.5, 0.5], NoiseSpec.laplace(1.0, 2), AffineInequality.nonnegative(2))
        sampler.draw(seed=9, size=2000)
        assert sampler.acceptance_rate == pytest.approx((1 - 0.5 * math.exp(-0.5)) ** 2, abs=0.03)

    def test_halfline_is_exponential(self):
        draws = rejection_sample([0.0], NoiseSpec.laplace(1.0, 1), AffineInequality.nonnegative(1), seed=0, size=10_000)
        assert draws.mean() == pytest.approx(1.0, abs=0.05)

    def test_seeded_determinism(self):
        args = ([0.0, 0.0], NoiseSpec.laplace(1.0, 2), AffineInequality.nonnegative(2))
        assert rejection_sample(*args, seed=5).tobytes() == rejection_sample(*args, seed=5).tobytes()

    def test_equality_has_zero_mass(self):
        with pytest.raises(ZeroMassError):
            rejection_sample(np.zeros(3), NoiseSpec.laplace(1.0, 3), AffineEquality.sum_to(3), seed=0)

    def test_timeout(self):
        with pytest.raises(AcceptanceTimeoutError) as info:
            rejection_sample([-30.0], NoiseSpec.laplace(1.0, 1), AffineInequality.nonnegative(1), seed=0, max_tries=1000)
        assert info.value.accepted == 0


def _small_mh(**overrides) -> MHConfig:
    settings = {"n_samples": 500, "burn_in": 200, "seed": 1}
    settings.update(overrides)
    return MHConfig(**settings)


class TestMHConfig:
    @pytest.mark.parametrize(
        "overrides",
        [
            {"n_samples": 0},
            {"burn_in": -1},
            {"thinning": 0},
            {"n_chains": 3},
            {"proposal_scale": 0.0},
            {"init": "bogus"},
            {"density_mode": "half"},
        ],
    )
    def test_invalid(self, overrides):
        with pytest.raises(MHConfigError):
            _small_mh(**overrides)


class TestHierarchicalMH:
    def test_every_draw_is_consistent(self, small):
        x = small.aggregate(np.arange(10.0, 70.0, 10.0))
        run = mh_sample(x, NoiseSpec.laplace(1.0, small.size), small, cfg=_small_mh())
        assert len(run) == 500
        assert np.all(contains(hierarchy_to_equalities(small), run.draws))
        assert 0.0 < run.acceptance_rate <= 1.0

    def test_seeded_determinism(self, small):
        x = small.aggregate(np.ones(6))
        noise = NoiseSpec.laplace(1.0, small.size)
        a = mh_sample(x, noise, small, cfg=_small_mh(seed=7))
        b = mh_sample(x, noise, small, cfg=_small_mh(seed=7))
        assert a.draws.tobytes() == b.draws.tobytes()

    def test_inconsistent_query_value(self, small):
        with pytest.raises(InfeasibleInvariantError):
            mh_sample(np.ones(small.size), NoiseSpec.laplace(1.0, small.size), small, cfg=_small_mh())

    def test_nonnegativity(self, small):
        x = small.aggregate(np.full(6, 0.5))
        ineq = AffineInequality.nonnegative(small.size)
        run = mh_sample(x, NoiseSpec.laplace(1.0, small.size), small, ineq, _small_mh())
        assert np.all(run.draws >= 0.0)

    def test_infeasible_start(self, small):
        x = small.aggregate([-1.0, 1.0, 1.0, 1.0, 1.0, 1.0])
        ineq = AffineInequality.nonnegative(small.size)
        with pytest.raises(InfeasibleStartError):
            mh_sample(x, NoiseSpec.laplace(1.0, small.size), small, ineq, _small_mh())

    def test_random_start_and_leaf_density(self, small):
        x = small.aggregate(np.full(6, 20.0))
        cfg = _small_mh(init="random", density_mode="leaf")
        run = mh_sample(x, NoiseSpec.laplace(1.0, small.size), small, cfg=cfg)
        assert np.all(contains(hierarchy_to_equalities(small), run.draws))

    def test_chains_are_stacked(self, small):
        x = small.aggregate(np.ones(6))
        run = mh_sample(x, NoiseSpec.laplace(1.0, small.size), small, cfg=_small_mh(n_samples=400, n_chains=2))
        assert run.n_chains == 2
        assert run.chains().shape == (2, 200, small.size)

    def test_centered_on_query_value(self):
        h = Hierarchy.from_parents({"r": None, "a": "r", "b": "r"})
        x = h.aggregate([3.0, 5.0])
        cfg = MHConfig(n_samples=20_000, burn_in=2000, seed=11)
        run = mh_sample(x, NoiseSpec.laplace(1.0, 3), h, cfg=cfg)
        np.testing.assert_allclose(run.draws.mean(axis=0), x, atol=0.15)


class TestAffineMH:
    def test_draws_satisfy_equality(self):
        eq = AffineEquality.sum_to(3, 0.0)
        run = mh_sample_affine([1.0, 2.0, -3.0], NoiseSpec.laplace(1.0, 3), eq, cfg=_small_mh())
        assert np.all(contains(eq, run.draws))

    def test_sample_conditional_dispatch(self):
        noise = NoiseSpec.laplace(1.0, 3)
        eq = AffineEquality.sum_to(3)
        one = sample_conditional(np.zeros(3), noise, eq, seed=2, cfg=_small_mh(burn_in=50))
        assert one.shape == (3,)
        assert contains(eq, one)
        halfline = sample_conditional([0.0], NoiseSpec.laplace(1.0, 1), AffineInequality.nonnegative(1), seed=2, size=10)
        assert halfline.shape == (10, 1)
        assert np.all(halfline >= 0.0)


class TestBatchMeansESS:
    def test_independent_draws(self, rng):
        draws = rng.standard_normal((5000, 4))
        ess, degenerate = batch_means_ess(draws)
        assert not degenerate
        assert 3000 < ess < 8000

    def test_constant_draws(self):
        assert batch_means_ess(np.ones((500, 3))) == (1.0, True)

    def test_too_short(self):
        ess, _ = batch_means_ess(np.zeros((10, 2)))
        assert math.isnan(ess)
