"""Tests for analytic references, audits, diagnostics and the claim suite."""

import json
import math

import numpy as np
import pytest
from scipy import stats

from cdp.belief.finite import Event, FiniteBeliefState, condition_finite
from cdp.composition.handles import additive_handle, imaged_handle, postprocess
from cdp.core.errors import InvalidScaleError
from cdp.invariants.affine import AffineEquality, AffineInequality, contains, solve_free_parametrization
from cdp.mechanisms.noise import NoiseSpec, PrivacyParams, density, sample_additive
from cdp.revision.conditional import conditional_density
from cdp.revision.mh import SampleSet
from cdp.verify.analytic import (
    analytic_conditioned_variance_n3,
    analytic_imaging_variance,
    conditioned_marginal_n3,
    conditioned_variance_n3_quadrature,
    free_marginal_quadrature,
    marginal_moment_quadrature,
)
from cdp.verify.audit import (
    AbsoluteContinuityError,
    SupportMismatchError,
    chart_grid,
    empirical_audit,
    kl_divergence,
    line_grid,
    privacy_audit,
    tv_distance,
    tv_to_density,
)
from cdp.verify.claims import CLAIMS, run_claims, write_report
from cdp.verify.diagnostics import TooFewSamplesError, mcmc_diagnostics


class TestAnalytic:
    @pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
    def test_conditioned_variance_by_quadrature(self, lam):
        assert conditioned_variance_n3_quadrature(lam) == pytest.approx(analytic_conditioned_variance_n3(lam), rel=1e-6)

    def test_marginal_is_a_density(self):
        total = marginal_moment_quadrature(lambda u: float(conditioned_marginal_n3(u, 1.3)), order=0)
        assert total == pytest.approx(1.0, rel=1e-8)

    def test_imaging_variance(self):
        assert analytic_imaging_variance(1.0, 3) == pytest.approx(4.0 / 3.0)
        assert analytic_imaging_variance(2.0, 2) == pytest.approx(4.0)

    def test_ordering(self):
        assert analytic_conditioned_variance_n3(1.0) < analytic_imaging_variance(1.0, 3) < 2.0

    @pytest.mark.parametrize("lam, n", [(0.0, 3), (-1.0, 3), (1.0, 1)])
    def test_invalid(self, lam, n):
        with pytest.raises(InvalidScaleError):
            analytic_imaging_variance(lam, n)

    def test_free_marginal_matches_closed_form(self):
        cond = conditional_density(np.zeros(3), NoiseSpec.laplace(1.0, 3), AffineEquality.sum_to(3))
        xs = [-1.0, 0.0, 0.5, 2.0]
        np.testing.assert_allclose(free_marginal_quadrature(cond, xs), conditioned_marginal_n3(xs, 1.0), rtol=1e-4)

    def test_free_marginal_needs_two_free_coordinates(self):
        cond = conditional_density(np.zeros(2), NoiseSpec.laplace(1.0, 2), AffineEquality.sum_to(2))
        with pytest.raises(ValueError):
            free_marginal_quadrature(cond, [0.0])


class TestPrivacyAudit:
    def test_laplace_shift_passes(self):
        noise = NoiseSpec.laplace(2.0, 1)
        report = privacy_audit(
            lambda z: density(noise, z), lambda z: density(noise, z - 1.0), 0.5, line_grid(-20, 20)
        )
        assert report.passed
        assert report.max_log_ratio == pytest.approx(0.5, rel=1e-9)
        assert report.margin >= 0

    def test_understated_epsilon_fails(self):
        noise = NoiseSpec.laplace(1.0, 1)
        report = privacy_audit(
            lambda z: density(noise, z), lambda z: density(noise, z - 1.0), 0.5, line_grid(-10, 10)
        )
        assert not report.passed
        assert report.margin < 0
        assert report.to_dict()["epsilon_target"] == 0.5

    def test_support_mismatch(self):
        noise = NoiseSpec.laplace(1.0, 1)
        halfline = conditional_density([0.0], noise, AffineInequality.nonnegative(1))
        with pytest.raises(SupportMismatchError):
            privacy_audit(halfline.evaluate, lambda z: density(noise, z), 1.0, line_grid(-1, 1, 11))

    def test_chart_grid_lies_on_constraint(self):
        eq = AffineEquality.sum_to(3, 6.0)
        grid = chart_grid(solve_free_parametrization(eq), [1.0, 2.0, 3.0], half_width=2.0, points=5)
        assert grid.shape == (25, 3)
        assert np.all(contains(eq, grid))

    def test_conditioned_density_ratio(self):
        eq = AffineEquality.sum_to(3, 13.0)
        fval = np.array([4.0, 6.0, 3.0])
        noise = NoiseSpec.laplace(2.0, 3)
        d1 = conditional_density(fval, noise, eq)
        d2 = conditional_density(fval + [1.0, -1.0, 0.0], noise, eq)
        grid = chart_grid(solve_free_parametrization(eq), fval, half_width=12.0, points=21)
        assert privacy_audit(d1.evaluate, d2.evaluate, 1.0, grid).passed


class TestEmpiricalAudit:
    def test_calibrated_release_passes(self):
        noise = NoiseSpec.laplace(1.0, 1)
        a = sample_additive([0.0], noise, seed=1, size=100_000)
        b = sample_additive([0.5], noise, seed=2, size=100_000)
        assert empirical_audit(a, b, 1.0).passed

    def test_large_shift_fails(self):
        noise = NoiseSpec.laplace(1.0, 1)
        a = sample_additive([0.0], noise, seed=1, size=100_000)
        b = sample_additive([5.0], noise, seed=2, size=100_000)
        assert not empirical_audit(a, b, 1.0).passed

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            empirical_audit(np.zeros(10), np.ones(10), 1.0)

    def test_imaged_release_passes(self):
        handle = imaged_handle(NoiseSpec.laplace(1.0, 2), AffineEquality.sum_to(2), PrivacyParams(1.0))
        a = handle.sample([0.0, 0.0], seed=1, size=100_000)[:, 0]
        b = handle.sample([0.25, -0.25], seed=2, size=100_000)[:, 0]
        assert empirical_audit(a, b, 1.0).passed

    def test_imaged_release_with_large_shift_fails(self):
        handle = imaged_handle(NoiseSpec.laplace(1.0, 2), AffineEquality.sum_to(2), PrivacyParams(1.0))
        a = handle.sample([0.0, 0.0], seed=1, size=100_000)[:, 0]
        b = handle.sample([2.5, -2.5], seed=2, size=100_000)[:, 0]
        assert not empirical_audit(a, b, 1.0).passed

    def test_postprocessed_release_passes(self):
        handle = postprocess(additive_handle(NoiseSpec.laplace(1.0, 1), PrivacyParams(1.0)), np.abs)
        a = handle.sample([0.0], seed=1, size=100_000)
        b = handle.sample([0.5], seed=2, size=100_000)
        assert empirical_audit(a, b, 1.0).passed


class TestDistances:
    def test_tv_identical_and_disjoint(self, rng):
        x = rng.normal(size=1000)
        assert tv_distance(x, x) == 0.0
        assert tv_distance(np.zeros(100), np.ones(100), bins=2) == pytest.approx(1.0)

    def test_tv_to_density(self):
        x = sample_additive([0.0], NoiseSpec.laplace(1.0, 1), seed=3, size=100_000)
        assert tv_to_density(x, stats.laplace.pdf, value_range=(-8.0, 8.0)) < 0.02

    def test_kl_of_conditioning(self):
        state = FiniteBeliefState.uniform([0, 1, 2, 3])
        cond = condition_finite(state, Event.of([0, 1]))
        assert kl_divergence(cond, state) == pytest.approx(math.log(2.0))
        assert kl_divergence(state, state) == 0.0

    def test_kl_needs_absolute_continuity(self):
        p = FiniteBeliefState.from_probs([0, 1], [1.0, 0.0])
        q = FiniteBeliefState.from_probs([0, 1], [0.5, 0.5])
        with pytest.raises(AbsoluteContinuityError):
            kl_divergence(q, p)

    def test_kl_needs_same_worlds(self):
        with pytest.raises(ValueError):
            kl_divergence(FiniteBeliefState.uniform([0, 1]), FiniteBeliefState.uniform([1, 2]))


class TestDiagnostics:
    def test_summary(self, rng):
        draws = rng.normal(size=(1000, 3))
        run = SampleSet(draws, acceptance_rate=0.0, ess=0.0, seed=0, accepted=300, proposed=1000)
        diag = mcmc_diagnostics(run)
        assert diag.acceptance_rate == pytest.approx(0.3)
        assert diag.n_draws == 1000
        np.testing.assert_allclose(diag.mean, draws.mean(axis=0))
        assert set(diag.to_dict()) == {"acceptance_rate", "ess", "degenerate", "n_draws", "mean", "variance"}

    def test_too_few_draws(self):
        run = SampleSet(np.zeros((50, 2)), acceptance_rate=0.5, ess=1.0, seed=0)
        with pytest.raises(TooFewSamplesError):
            mcmc_diagnostics(run)

    def test_degenerate_chain(self):
        run = SampleSet(np.ones((200, 2)), acceptance_rate=0.0, ess=1.0, seed=0)
        diag = mcmc_diagnostics(run)
        assert diag.degenerate
        assert diag.ess == 1.0


QUICK_CLAIMS = [
    "finite.example_banana",
    "revision.normalizer_n3",
    "revision.conditioned_privacy",
    "composition.disjoint_union_finite",
    "composition.mixture_imaging_finite",
]


class TestClaims:
    def test_quick_claims_pass(self, capsys):
        results = run_claims(QUICK_CLAIMS, draws=1000, seed=0)
        assert all(results[c].passed for c in QUICK_CLAIMS)
        assert "[PASS] finite.example_banana" in capsys.readouterr().out

    def test_unknown_claim(self):
        with pytest.raises(KeyError):
            run_claims(["no.such.claim"], verbose=False)

    def test_report(self, tmp_path):
        results = run_claims(["finite.example_banana"], verbose=False)
        path = tmp_path / "report.json"
        write_report(results, path)
        payload = json.loads(path.read_text())
        assert payload["finite.example_banana"]["passed"] is True
        assert payload["finite.example_banana"]["expected"]["imaged"] == [0, 0, 0.3, 0.7]

    def test_every_claim_is_registered_under_its_id(self):
        assert len(CLAIMS) == 13
        result = CLAIMS["finite.example_banana"](10, 0)
        assert result.claim_id == "finite.example_banana"

    @pytest.mark.slow
    def test_imaging_variance_claim(self):
        assert run_claims(["update.imaging_variance"], draws=10 ** 5, verbose=False)["update.imaging_variance"].passed

    @pytest.mark.slow
    def test_kl_minimality_claim(self):
        assert run_claims(["belief.kl_minimality"], verbose=False)["belief.kl_minimality"].passed

    def test_disjoint_union_continuous_claim(self):
        result = run_claims(["composition.disjoint_union_continuous"], draws=10 ** 5, verbose=False)
        claim = result["composition.disjoint_union_continuous"]
        assert claim.passed
        assert claim.observed["weight"] == pytest.approx(claim.expected["weight"])

    @pytest.mark.slow
    def test_mixture_imaging_continuous_claim(self):
        claim_id = "composition.mixture_imaging_continuous"
        assert run_claims([claim_id], draws=10 ** 6, verbose=False)[claim_id].passed

    @pytest.mark.slow
    @pytest.mark.parametrize(
        "claim_id",
        ["update.gaussian_equivalence", "revision.conditioned_variance_n3", "verify.variance_sandwich"],
    )
    def test_monte_carlo_claims_at_full_size(self, claim_id):
        assert run_claims([claim_id], draws=10 ** 6, verbose=False)[claim_id].passed
