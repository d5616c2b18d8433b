"""Euclidean projection onto invariants.

Affine equalities use the closed form ``y - A^T (A A^T)^{-1} (A y - b)`` with a
cached Cholesky factor. Intersections with inequalities use Dykstra's
alternating projections between the affine set and the halfspaces (or the
box, when every inequality row is a coordinate bound). All routines accept a
single vector or an ``(N, n)`` batch of rows.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, List, Optional

import numpy as np
from scipy import linalg

from cdp.core.errors import CDPError, check_length
from cdp.invariants.affine import (
    AffineEquality,
    AffineInequality,
    ConstraintSet,
    Invariant,
    split_invariant,
)

DYKSTRA_TOL = 1e-8
DYKSTRA_MAX_ITER = 10 ** 5


class SingularSystemError(CDPError, ValueError):
    """Raised when ``A A^T`` cannot be factorised."""


class ConvergenceError(CDPError, RuntimeError):
    """Raised when Dykstra's iteration stops before reaching its tolerance."""

    def __init__(self, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"no convergence after {iterations} sweeps (residual {residual:.3g}); "
            "the constraint set may be empty"
        )


class ProjectionMethod(Enum):
    CLOSED_FORM_AFFINE = "closed_form_affine"
    DYKSTRA = "dykstra"


def _affine_projector(eq: AffineEquality) -> Callable[[np.ndarray], np.ndarray]:
    if eq.rows == 0:
        return lambda y: y
    try:
        factor = linalg.cho_factor(eq.A @ eq.A.T)
    except linalg.LinAlgError as exc:
        raise SingularSystemError(f"A A^T is singular for A of shape {eq.A.shape}") from exc
    A, b = eq.A, eq.b

    def project(y: np.ndarray) -> np.ndarray:
        r = y @ A.T - b
        w = linalg.cho_solve(factor, r.T).T
        return y - w @ A

    return project


def _inequality_projectors(ineq: AffineInequality) -> List[Callable[[np.ndarray], np.ndarray]]:
    bounds = ineq.coordinate_bounds()
    if bounds is not None:
        lower, upper = bounds
        return [lambda y: np.clip(y, lower, upper)]
    projectors = []
    for row, bound in zip(ineq.A, ineq.a):
        norm2 = float(row @ row)
        if norm2 == 0.0:
            continue

        def project(y: np.ndarray, row: np.ndarray = row, bound: float = bound, norm2: float = norm2) -> np.ndarray:
            gap = np.maximum(bound - y @ row, 0.0)
            return y + gap[..., np.newaxis] * row / norm2

        projectors.append(project)
    return projectors


@dataclass(frozen=True, eq=False)
class Projector:
    """L2 projection onto a fixed invariant.

    Attributes:
        constraint: Target set.
        tol: Dykstra stopping tolerance (change per sweep and inequality slack).
        max_iter: Dykstra sweep cap.
        method: Closed form for pure equalities, Dykstra otherwise (derived).
    """

    constraint: Invariant
    tol: float = DYKSTRA_TOL
    max_iter: int = DYKSTRA_MAX_ITER
    method: ProjectionMethod = field(init=False)
    _affine: Callable[[np.ndarray], np.ndarray] = field(init=False, repr=False)
    _halfspaces: List[Callable[[np.ndarray], np.ndarray]] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        eq, ineq = split_invariant(self.constraint)
        n = self.constraint.dim
        affine = _affine_projector(eq if eq is not None else AffineEquality(np.zeros((0, n)), np.zeros(0)))
        halfspaces = _inequality_projectors(ineq) if ineq is not None and ineq.rows else []
        method = ProjectionMethod.DYKSTRA if halfspaces else ProjectionMethod.CLOSED_FORM_AFFINE
        object.__setattr__(self, "_affine", affine)
        object.__setattr__(self, "_halfspaces", halfspaces)
        object.__setattr__(self, "method", method)

    def apply(self, y: Any) -> np.ndarray:
        """Project ``y`` (``(n,)`` or ``(N, n)``).

        Raises:
            ConvergenceError: If Dykstra does not converge within ``max_iter``.
        """
        x = np.asarray(y, dtype=np.float64)
        check_length(x.shape[-1], self.constraint.dim, "vector")
        if self.method is ProjectionMethod.CLOSED_FORM_AFFINE:
            return self._affine(x)
        return self._dykstra(x)

    __call__ = apply

    def _violation(self, x: np.ndarray) -> np.ndarray:
        _, ineq = split_invariant(self.constraint)
        assert ineq is not None
        return np.maximum(-ineq.slack(x), 0.0).max(axis=-1)

    def _dykstra(self, y: np.ndarray) -> np.ndarray:
        sets = self._halfspaces + [self._affine]
        batch = y.reshape(-1, y.shape[-1])
        x = batch.copy()
        increments = [np.zeros_like(x) for _ in sets]
        scale = np.maximum(1.0, np.abs(batch).max(axis=-1))
        residual = np.inf
        for _ in range(self.max_iter):
            previous = x
            for j, project in enumerate(sets):
                z = x + increments[j]
                x = project(z)
                increments[j] = z - x
            change = np.abs(x - previous).max(axis=-1) / scale
            slack = self._violation(x) / scale
            residual = float(np.maximum(change, slack).max())
            if residual <= self.tol:
                return x.reshape(y.shape)
        raise ConvergenceError(residual, self.max_iter)


def project_affine(y: Any, eq: AffineEquality) -> np.ndarray:
    """Closest point of ``{z : A z = b}`` to ``y``; rows of a batch independently.

    Raises:
        SingularSystemError: If ``A A^T`` is numerically singular.
    """
    return Projector(eq).apply(y)


def project_convex(
    y: Any,
    eq: Optional[AffineEquality],
    ineq: Optional[AffineInequality],
    tol: float = DYKSTRA_TOL,
    max_iter: int = DYKSTRA_MAX_ITER,
) -> np.ndarray:
    """Closest point of ``{A z = b} n {G z >= a}`` to ``y`` by Dykstra's algorithm.

    Raises:
        ConvergenceError: After ``max_iter`` sweeps without meeting ``tol``.
    """
    return Projector(ConstraintSet(eq, ineq), tol=tol, max_iter=max_iter).apply(y)
