"""Constrained mechanisms as belief update (imaging)."""

from cdp.update.imaging import imaged_mechanism
from cdp.update.projection import (
    ConvergenceError,
    ProjectionMethod,
    Projector,
    SingularSystemError,
    project_affine,
    project_convex,
)
from cdp.update.topdown import topdown

__all__ = [
    "ConvergenceError",
    "ProjectionMethod",
    "Projector",
    "SingularSystemError",
    "imaged_mechanism",
    "project_affine",
    "project_convex",
    "topdown",
]
