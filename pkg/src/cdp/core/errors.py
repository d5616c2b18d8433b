"""Exceptions shared across modules.

Module-specific failures (e.g. ``RankDeficientError``) live next to the code
that raises them; everything here is raised from more than one module.
"""

from typing import Optional, Sequence


class CDPError(Exception):
    """Base class for all library errors."""


class DimensionMismatchError(CDPError, ValueError):
    """Raised when a vector does not have the expected length."""

    def __init__(self, expected: int, actual: int, what: str = "vector"):
        self.expected = expected
        self.actual = actual
        super().__init__(f"{what} has length {actual}, expected {expected}")


class InvalidBudgetError(CDPError, ValueError):
    """Raised for a privacy budget outside epsilon > 0, 0 <= delta < 1."""


class InvalidScaleError(CDPError, ValueError):
    """Raised when a noise scale or dimension is not positive."""


class WeightError(CDPError, ValueError):
    """Raised when mixture weights are negative or do not sum to one."""

    def __init__(self, weights: Sequence[float], message: Optional[str] = None):
        self.weights = list(weights)
        super().__init__(message or f"invalid mixture weights {self.weights}")


class ZeroMassError(CDPError, ValueError):
    """Raised when an invariant has (numerically) zero probability."""

    def __init__(self, mass: float, message: Optional[str] = None):
        self.mass = mass
        super().__init__(message or f"invariant has probability {mass:.3g} under the mechanism")


def check_length(values_len: int, expected: int, what: str = "vector") -> None:
    """Raise ``DimensionMismatchError`` unless ``values_len == expected``."""
    if values_len != expected:
        raise DimensionMismatchError(expected, values_len, what)
