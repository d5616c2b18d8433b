"""Analytic references, privacy audits and sampler diagnostics."""

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
    AuditReport,
    SupportMismatchError,
    binned_probabilities,
    chart_grid,
    empirical_audit,
    kl_divergence,
    line_grid,
    privacy_audit,
    tv_distance,
    tv_to_density,
)
from cdp.verify.claims import CLAIMS, ClaimResult, run_claims, write_report
from cdp.verify.diagnostics import ChainDiagnostics, TooFewSamplesError, mcmc_diagnostics

__all__ = [
    "AbsoluteContinuityError",
    "AuditReport",
    "CLAIMS",
    "ChainDiagnostics",
    "ClaimResult",
    "SupportMismatchError",
    "TooFewSamplesError",
    "analytic_conditioned_variance_n3",
    "analytic_imaging_variance",
    "binned_probabilities",
    "chart_grid",
    "conditioned_marginal_n3",
    "conditioned_variance_n3_quadrature",
    "empirical_audit",
    "free_marginal_quadrature",
    "kl_divergence",
    "line_grid",
    "marginal_moment_quadrature",
    "mcmc_diagnostics",
    "privacy_audit",
    "run_claims",
    "tv_distance",
    "tv_to_density",
    "write_report",
]
