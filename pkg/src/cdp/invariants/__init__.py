"""Invariant sets, free parametrisation and region hierarchies."""

from cdp.invariants.affine import (
    EQUALITY_TOL,
    AffineEquality,
    AffineInequality,
    ConstraintSet,
    FreeParametrization,
    Invariant,
    RankDeficientError,
    contains,
    dump_constraints,
    load_constraints,
    product_invariant,
    solve_free_parametrization,
    split_invariant,
)
from cdp.invariants.hierarchy import Hierarchy, MalformedHierarchyError, hierarchy_to_equalities

__all__ = [
    "EQUALITY_TOL",
    "AffineEquality",
    "AffineInequality",
    "ConstraintSet",
    "FreeParametrization",
    "Hierarchy",
    "Invariant",
    "MalformedHierarchyError",
    "RankDeficientError",
    "contains",
    "dump_constraints",
    "hierarchy_to_equalities",
    "load_constraints",
    "product_invariant",
    "solve_free_parametrization",
    "split_invariant",
]
