"""Finite belief states: the exact oracle for conditioning and imaging."""

from cdp.belief.finite import (
    Event,
    FiniteBeliefState,
    MissingClosestWorldError,
    UnknownWorldError,
    ZeroProbabilityError,
    closest_map_from_distance,
    condition_finite,
    image_finite,
    load_scenario,
    mix_finite,
)

__all__ = [
    "Event",
    "FiniteBeliefState",
    "MissingClosestWorldError",
    "UnknownWorldError",
    "ZeroProbabilityError",
    "closest_map_from_distance",
    "condition_finite",
    "image_finite",
    "load_scenario",
    "mix_finite",
]
