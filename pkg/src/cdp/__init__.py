"""cdp - constrained differential privacy.

Releases that must satisfy public invariants, built two ways: conditioning
the noisy mechanism on the invariant (belief revision) or projecting its
output onto it (belief update). Includes a finite oracle, samplers,
projections, composition operators, numerical checks and a benchmark
harness for hierarchical counts.
"""

__version__ = "0.1.0"

from cdp.belief.finite import Event, FiniteBeliefState, condition_finite, image_finite
from cdp.config.settings import ExperimentConfig
from cdp.core.errors import CDPError
from cdp.invariants.affine import AffineEquality, AffineInequality, ConstraintSet
from cdp.invariants.hierarchy import Hierarchy
from cdp.mechanisms.noise import NoiseKind, NoiseSpec, PrivacyParams

__all__ = [
    "AffineEquality",
    "AffineInequality",
    "CDPError",
    "ConstraintSet",
    "Event",
    "ExperimentConfig",
    "FiniteBeliefState",
    "Hierarchy",
    "NoiseKind",
    "NoiseSpec",
    "PrivacyParams",
    "condition_finite",
    "image_finite",
]
