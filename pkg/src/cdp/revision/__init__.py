"""Constrained mechanisms as belief revision (conditioning)."""

from cdp.revision.conditional import (
    AcceptanceTimeoutError,
    ConditionalDensity,
    DensityCase,
    InfeasibleInvariantError,
    NormalizerEstimate,
    QuadratureError,
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
    NonconvergenceWarning,
    SampleSet,
    batch_means_ess,
    mh_sample,
    mh_sample_affine,
    sample_conditional,
)

__all__ = [
    "AcceptanceTimeoutError",
    "ConditionalDensity",
    "DensityCase",
    "InfeasibleInvariantError",
    "InfeasibleStartError",
    "MHConfig",
    "MHConfigError",
    "NonconvergenceWarning",
    "NormalizerEstimate",
    "QuadratureError",
    "RejectionSampler",
    "SampleSet",
    "batch_means_ess",
    "conditional_density",
    "estimate_normalizer",
    "invariant_mass",
    "mh_sample",
    "mh_sample_affine",
    "normalizing_constant",
    "rejection_sample",
    "sample_conditional",
]
