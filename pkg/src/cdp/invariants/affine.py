"""Affine invariant sets and their free-variable parametrisation.

An invariant is a convex set ``C`` that both the confidential query value and
every release must lie in. Three shapes are supported:

- ``AffineEquality``: ``{z : A z = b}`` with ``A`` of full row rank,
- ``AffineInequality``: ``{z : A z >= a}``,
- ``ConstraintSet``: the intersection of one of each.

The measure-zero conditioning path works in the coordinates of a
``FreeParametrization``: the free coordinates of ``z`` determine the others.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from cdp.core.errors import CDPError, check_length

EQUALITY_TOL = 1e-9
RANK_TOL = 1e-10


class RankDeficientError(CDPError, ValueError):
    """Raised when an equality system does not have full row rank."""

    def __init__(self, rows: int, rank: int, pivot: float):
        self.rows = rows
        self.rank = rank
        self.pivot = pivot
        super().__init__(
            f"constraint matrix has {rows} rows but numerical rank {rank} "
            f"(pivot magnitude {pivot:.3g} below tolerance)"
        )


def _as_matrix(A: Any, n: Optional[int] = None) -> np.ndarray:
    M = np.asarray(A, dtype=np.float64)
    if M.size == 0:
        return np.zeros((0, n if n is not None else (M.shape[-1] if M.ndim == 2 else 0)))
    if M.ndim == 1:
        M = M[np.newaxis, :]
    if M.ndim != 2:
        raise ValueError(f"constraint matrix must be 2-D, got shape {M.shape}")
    return M


@dataclass(frozen=True, eq=False)
class AffineEquality:
    """The affine set ``{z : A z = b}``.

    Attributes:
        A: ``(rows, n)`` matrix with ``rows < n`` and full row rank.
        b: Right-hand side of length ``rows``.
    """

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self) -> None:
        A = _as_matrix(self.A)
        b = np.asarray(self.b, dtype=np.float64).reshape(-1)
        if b.shape[0] != A.shape[0]:
            raise ValueError(f"A has {A.shape[0]} rows but b has length {b.shape[0]}")
        if A.shape[0] >= A.shape[1] and A.shape[0] > 0:
            raise ValueError(f"need fewer constraints than coordinates, got A of shape {A.shape}")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        if A.shape[0]:
            singular = np.linalg.svd(A, compute_uv=False)
            rank = int(np.sum(singular > RANK_TOL * max(1.0, float(np.abs(A).max()))))
            if rank < A.shape[0]:
                raise RankDeficientError(A.shape[0], rank, float(singular[-1]))

    @classmethod
    def sum_to(cls, n: int, total: float = 0.0) -> "AffineEquality":
        """Single constraint ``z_1 + ... + z_n = total``."""
        return cls(np.ones((1, n)), np.array([float(total)]))

    @property
    def dim(self) -> int:
        return int(self.A.shape[1])

    @property
    def rows(self) -> int:
        return int(self.A.shape[0])

    def residual(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=np.float64) @ self.A.T - self.b

    def homogeneous(self) -> "AffineEquality":
        """The parallel linear subspace ``{u : A u = 0}`` (the noise-space constraint)."""
        return AffineEquality(self.A, np.zeros(self.rows))


@dataclass(frozen=True, eq=False)
class AffineInequality:
    """The polyhedron ``{z : A z >= a}``.

    Attributes:
        A: ``(rows, n)`` matrix.
        a: Lower bounds of length ``rows``.
    """

    A: np.ndarray
    a: np.ndarray

    def __post_init__(self) -> None:
        A = _as_matrix(self.A)
        a = np.asarray(self.a, dtype=np.float64).reshape(-1)
        if a.shape[0] != A.shape[0]:
            raise ValueError(f"A has {A.shape[0]} rows but a has length {a.shape[0]}")
        A.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "a", a)

    @classmethod
    def nonnegative(cls, n: int) -> "AffineInequality":
        return cls(np.eye(n), np.zeros(n))

    @classmethod
    def halfspace(cls, n: int, coordinate: int, bound: float, upper: bool = False) -> "AffineInequality":
        """``z_i >= bound`` (or ``z_i <= bound`` with ``upper=True``)."""
        row = np.zeros((1, n))
        row[0, coordinate] = -1.0 if upper else 1.0
        return cls(row, np.array([-bound if upper else bound]))

    @property
    def dim(self) -> int:
        return int(self.A.shape[1])

    @property
    def rows(self) -> int:
        return int(self.A.shape[0])

    def slack(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=np.float64) @ self.A.T - self.a

    def coordinate_bounds(self) -> Optional[Tuple[np.ndarray, np.ndarray]]:
        """Per-coordinate ``(lower, upper)`` bounds when every row is a coordinate halfspace.

        Returns ``None`` if some row involves more than one coordinate. Rows
        with no nonzero entry must be trivially satisfied (``0 >= a``) and are
        otherwise reported as an empty box (``lower > upper``).
        """
        lower = np.full(self.dim, -np.inf)
        upper = np.full(self.dim, np.inf)
        for row, bound in zip(self.A, self.a):
            nonzero = np.flatnonzero(row)
            if nonzero.size > 1:
                return None
            if nonzero.size == 0:
                if bound > 0:
                    lower[:] = np.inf
                    upper[:] = -np.inf
                continue
            i = int(nonzero[0])
            limit = bound / row[i]
            if row[i] > 0:
                lower[i] = max(lower[i], limit)
            else:
                upper[i] = min(upper[i], limit)
        return lower, upper


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """Intersection of an equality system and an inequality system.

    Attributes:
        equality: Optional equality part.
        inequality: Optional inequality part.
    """

    equality: Optional[AffineEquality] = None
    inequality: Optional[AffineInequality] = None

    def __post_init__(self) -> None:
        if self.equality is None and self.inequality is None:
            raise ValueError("a constraint set needs at least one part")
        if self.equality is not None and self.inequality is not None:
            check_length(self.inequality.dim, self.equality.dim, "inequality system")

    @property
    def dim(self) -> int:
        part = self.equality if self.equality is not None else self.inequality
        assert part is not None
        return part.dim


Invariant = Union[AffineEquality, AffineInequality, ConstraintSet]


def split_invariant(inv: Invariant) -> Tuple[Optional[AffineEquality], Optional[AffineInequality]]:
    if isinstance(inv, AffineEquality):
        return inv, None
    if isinstance(inv, AffineInequality):
        return None, inv
    return inv.equality, inv.inequality


def contains(inv: Invariant, z: Any, tol: float = EQUALITY_TOL, rtol: float = 0.0) -> Union[bool, np.ndarray]:
    """Membership test; ``z`` may be one vector or an ``(N, n)`` batch.

    Equality rows must hold within ``tol + rtol * |z|_inf`` and inequality
    rows may be violated by at most the same slack. With the default
    ``rtol=0`` the test is absolute.

    Raises:
        DimensionMismatchError: If ``z`` has the wrong length.
    """
    x = np.asarray(z, dtype=np.float64)
    check_length(x.shape[-1], inv.dim, "vector")
    slack = tol + rtol * np.abs(x).max(axis=-1)
    eq, ineq = split_invariant(inv)
    ok = np.ones(x.shape[:-1], dtype=bool)
    if eq is not None and eq.rows:
        ok &= np.all(np.abs(eq.residual(x)) <= slack[..., np.newaxis], axis=-1)
    if ineq is not None and ineq.rows:
        ok &= np.all(ineq.slack(x) >= -slack[..., np.newaxis], axis=-1)
    return bool(ok) if ok.ndim == 0 else ok


@dataclass(frozen=True, eq=False)
class FreeParametrization:
    """Solve map from free coordinates onto ``{z : A z = b}``.

    Dependent (pivot) coordinates are affine functions of the free ones:
    ``z[dependent] = offset - coupling @ z[free]``.

    Attributes:
        n: Ambient dimension.
        free_indices: Indices of the free coordinates, ascending.
        dependent_indices: Indices of the pivot coordinates.
        coupling: ``(len(dependent), len(free))`` matrix.
        offset: Value of the dependent coordinates when all free ones are zero.
    """

    n: int
    free_indices: np.ndarray
    dependent_indices: np.ndarray
    coupling: np.ndarray
    offset: np.ndarray

    @property
    def free_dim(self) -> int:
        return int(self.free_indices.shape[0])

    def solve(self, v: Any) -> np.ndarray:
        """Full vector(s) from free values; ``v`` is ``(k,)`` or ``(N, k)``."""
        w = np.asarray(v, dtype=np.float64)
        check_length(w.shape[-1], self.free_dim, "free-coordinate vector")
        z = np.empty(w.shape[:-1] + (self.n,))
        z[..., self.free_indices] = w
        z[..., self.dependent_indices] = self.offset - w @ self.coupling.T
        return z

    def free_part(self, z: Any) -> np.ndarray:
        return np.asarray(z, dtype=np.float64)[..., self.free_indices]

    def basis(self) -> np.ndarray:
        """``(n, k)`` matrix N with ``solve_homogeneous(v) = N v`` (columns span ker A)."""
        N = np.zeros((self.n, self.free_dim))
        N[self.free_indices, np.arange(self.free_dim)] = 1.0
        N[self.dependent_indices, :] = -self.coupling
        return N

    def homogeneous(self) -> "FreeParametrization":
        return FreeParametrization(
            self.n, self.free_indices, self.dependent_indices, self.coupling, np.zeros_like(self.offset)
        )

    def jacobian_note(self) -> str:
        lines = []
        for row, dep in enumerate(self.dependent_indices):
            terms = [
                f"{-c:+g}*z{j}" for c, j in zip(self.coupling[row], self.free_indices) if c != 0
            ]
            lines.append(f"z{dep} = {self.offset[row]:g} " + " ".join(terms))
        return "\n".join(lines)


def solve_free_parametrization(eq: AffineEquality) -> FreeParametrization:
    """Gaussian elimination with column pivoting on ``[A | b]``.

    Each row picks the column of largest magnitude among the remaining ones;
    ties go to the right-most column, so with leaves-first coordinate
    ordering the aggregate (internal) coordinates become the dependent ones.

    Raises:
        RankDeficientError: If a pivot falls below ``1e-10`` relative to the
            largest entry of ``A``.
    """
    A = np.array(eq.A, dtype=np.float64)
    b = np.array(eq.b, dtype=np.float64)
    rows, n = A.shape
    if rows == 0:
        return FreeParametrization(
            n, np.arange(n), np.zeros(0, dtype=int), np.zeros((0, n)), np.zeros(0)
        )
    tol = RANK_TOL * max(1.0, float(np.abs(A).max()))
    pivots: List[int] = []
    for r in range(rows):
        magnitudes = np.abs(A[r])
        magnitudes[pivots] = -1.0
        best = magnitudes.max()
        if best <= tol:
            raise RankDeficientError(rows, r, float(best))
        col = int(np.flatnonzero(magnitudes >= best * (1.0 - 1e-12))[-1])
        scale = A[r, col]
        A[r] /= scale
        b[r] /= scale
        pivots.append(col)
        for other in range(rows):
            if other != r and A[other, col] != 0.0:
                factor = A[other, col]
                A[other] -= factor * A[r]
                b[other] -= factor * b[r]
    dependent = np.array(pivots, dtype=int)
    free = np.array(sorted(set(range(n)) - set(pivots)), dtype=int)
    return FreeParametrization(n, free, dependent, A[:, free], b)


def dump_constraints(eq: AffineEquality, order: Sequence[str], path: Path) -> None:
    """Write ``{A, b, order}`` as JSON."""
    payload: Dict[str, Any] = {"A": eq.A.tolist(), "b": eq.b.tolist(), "order": list(order)}
    Path(path).write_text(json.dumps(payload, indent=2))


def load_constraints(path: Path) -> Tuple[AffineEquality, List[str]]:
    data = json.loads(Path(path).read_text())
    n = len(data.get("order", [])) or None
    return AffineEquality(_as_matrix(data["A"], n), np.asarray(data["b"])), list(data.get("order", []))


def product_invariant(parts: Sequence[Optional[Invariant]], dims: Sequence[int]) -> Optional[ConstraintSet]:
    """Joint invariant ``C1 x C2 x ...`` on the concatenated coordinates.

    Components without an invariant contribute no rows. Returns ``None`` when
    no component has one.
    """
    if all(p is None for p in parts):
        return None
    eq_blocks, eq_rhs, in_blocks, in_rhs = [], [], [], []
    for part, d in zip(parts, dims):
        eq, ineq = split_invariant(part) if part is not None else (None, None)
        eq_blocks.append(eq.A if eq is not None else np.zeros((0, d)))
        eq_rhs.append(eq.b if eq is not None else np.zeros(0))
        in_blocks.append(ineq.A if ineq is not None else np.zeros((0, d)))
        in_rhs.append(ineq.a if ineq is not None else np.zeros(0))
    A_eq = linalg.block_diag(*eq_blocks)
    A_in = linalg.block_diag(*in_blocks)
    total = int(sum(dims))
    equality = AffineEquality(A_eq.reshape(-1, total), np.concatenate(eq_rhs)) if A_eq.shape[0] else None
    inequality = AffineInequality(A_in.reshape(-1, total), np.concatenate(in_rhs)) if A_in.shape[0] else None
    if equality is None and inequality is None:
        return None
    return ConstraintSet(equality, inequality)
