"""Finite possible-worlds belief states: conditioning, imaging and mixtures.

This is the exact oracle for the continuous machinery. A belief state is a
probability vector over an ordered list of world labels plus an optional
closest-world map used by imaging.

Example:
    state = FiniteBeliefState.from_probs(["w1", "w2", "w3", "w4"], [0, 0.7, 0.3, 0])
    banana = Event.of(["w3", "w4"])

    condition_finite(state, banana).probs   # (0, 0, 1, 0)

    state = state.with_closest({("w1", banana): "w3", ("w2", banana): "w4"})
    image_finite(state, banana).probs       # (0, 0, 0.3, 0.7)
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import (
    Any,
    Callable,
    Dict,
    FrozenSet,
    Hashable,
    Iterable,
    Mapping,
    Optional,
    Sequence,
    Tuple,
)

import numpy as np

from cdp.core.errors import CDPError, WeightError

PROB_TOL = 1e-12
WEIGHT_TOL = 1e-9

World = Hashable
ClosestMap = Mapping[Tuple[World, Any], World]


class ZeroProbabilityError(CDPError, ValueError):
    """Raised when conditioning on an event of probability zero."""

    def __init__(self, event: "Event"):
        self.event = event
        super().__init__(
            f"cannot condition on {event.label()}: P(event) = 0; "
            "use the measure-zero conditional density instead"
        )


class MissingClosestWorldError(CDPError, KeyError):
    """Raised when imaging needs a closest world that was never supplied."""

    def __init__(self, world: World, event: "Event"):
        self.world = world
        self.event = event
        super().__init__(f"no closest world in {event.label()} for world {world!r}")


class UnknownWorldError(CDPError, ValueError):
    """Raised when an event mentions worlds the state does not have."""


@dataclass(frozen=True)
class Event:
    """A set of worlds.

    Attributes:
        members: World labels belonging to the event.
        name: Optional display name.
    """

    members: FrozenSet[World]
    name: Optional[str] = field(default=None, compare=False)

    @classmethod
    def of(cls, members: Iterable[World], name: Optional[str] = None) -> "Event":
        return cls(frozenset(members), name)

    def label(self) -> str:
        if self.name:
            return f"event '{self.name}'"
        return "event {" + ", ".join(sorted(str(m) for m in self.members)) + "}"

    def __contains__(self, world: object) -> bool:
        return world in self.members

    def union(self, other: "Event") -> "Event":
        return Event(self.members | other.members)


@dataclass(frozen=True, eq=False)
class FiniteBeliefState:
    """Probability measure over finitely many worlds.

    Attributes:
        worlds: Ordered world labels.
        probs: Probability of each world, aligned with ``worlds``.
        closest: Optional map ``(world, event members) -> world in event``.
    """

    worlds: Tuple[World, ...]
    probs: np.ndarray
    closest: Optional[ClosestMap] = None

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 1 or probs.shape[0] != len(self.worlds):
            raise ValueError(
                f"need one probability per world: {len(self.worlds)} worlds, "
                f"probs shape {probs.shape}"
            )
        if len(set(self.worlds)) != len(self.worlds):
            raise ValueError("world labels must be unique")
        if np.any(probs < 0):
            raise ValueError("probabilities must be nonnegative")
        if abs(probs.sum() - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {probs.sum()!r}, not 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        if self.closest is not None:
            normalized: Dict[Tuple[World, Any], World] = {}
            for (world, members), target in self.closest.items():
                key = members.members if isinstance(members, Event) else frozenset(members)
                if target not in key:
                    raise ValueError(f"closest world {target!r} is not inside its event")
                normalized[(world, key)] = target
            object.__setattr__(self, "closest", normalized)

    @classmethod
    def from_probs(
        cls,
        worlds: Sequence[World],
        probs: Sequence[float],
        closest: Optional[ClosestMap] = None,
    ) -> "FiniteBeliefState":
        return cls(tuple(worlds), np.asarray(probs, dtype=np.float64), closest)

    @classmethod
    def uniform(cls, worlds: Sequence[World]) -> "FiniteBeliefState":
        return cls.from_probs(worlds, np.full(len(worlds), 1.0 / len(worlds)))

    @classmethod
    def point_mass(cls, worlds: Sequence[World], world: World) -> "FiniteBeliefState":
        probs = np.zeros(len(worlds))
        probs[list(worlds).index(world)] = 1.0
        return cls.from_probs(worlds, probs)

    def with_closest(self, closest: ClosestMap) -> "FiniteBeliefState":
        """Return a copy carrying (additional) closest-world assignments."""
        merged: Dict[Tuple[World, Any], World] = dict(self.closest or {})
        merged.update(closest)
        return FiniteBeliefState(self.worlds, self.probs, merged)

    def mask(self, event: Event) -> np.ndarray:
        """Boolean membership vector of ``event`` over this state's worlds."""
        unknown = event.members.difference(self.worlds)
        if unknown:
            raise UnknownWorldError(
                f"{event.label()} mentions unknown worlds {sorted(map(str, unknown))}"
            )
        return np.array([w in event.members for w in self.worlds], dtype=bool)

    def probability(self, event: Event) -> float:
        return float(self.probs[self.mask(event)].sum())

    def support(self) -> Event:
        return Event.of(w for w, p in zip(self.worlds, self.probs) if p > 0)

    def as_dict(self) -> Dict[World, float]:
        return {w: float(p) for w, p in zip(self.worlds, self.probs)}


def condition_finite(state: FiniteBeliefState, event: Event) -> FiniteBeliefState:
    """Bayesian conditioning P(. | event).

    Raises:
        ZeroProbabilityError: If the event has probability zero.
    """
    inside = state.mask(event)
    mass = state.probs[inside].sum()
    if mass <= 0:
        raise ZeroProbabilityError(event)
    probs = np.where(inside, state.probs / mass, 0.0)
    return FiniteBeliefState(state.worlds, probs, state.closest)


def image_finite(state: FiniteBeliefState, event: Event) -> FiniteBeliefState:
    """Imaging on ``event``: each world's mass moves to its closest world in the event.

    Worlds already inside the event default to themselves when no explicit
    assignment is given.

    Raises:
        MissingClosestWorldError: If a positive-probability world outside the
            event has no closest world.
    """
    inside = state.mask(event)
    closest = state.closest or {}
    position = {w: i for i, w in enumerate(state.worlds)}
    probs = np.zeros(len(state.worlds))
    for i, (world, p) in enumerate(zip(state.worlds, state.probs)):
        if p == 0:
            continue
        target = closest.get((world, event.members))
        if target is None:
            if not inside[i]:
                raise MissingClosestWorldError(world, event)
            target = world
        probs[position[target]] += p
    return FiniteBeliefState(state.worlds, probs, state.closest)


def mix_finite(
    states: Sequence[FiniteBeliefState],
    weights: Sequence[float],
) -> FiniteBeliefState:
    """Convex combination of belief states over a shared world list.

    Closest-world maps of the components are merged so the mixture can be
    imaged with the same assignments.

    Raises:
        WeightError: If weights are negative or do not sum to one.
    """
    w = np.asarray(weights, dtype=np.float64)
    if len(states) == 0 or w.shape != (len(states),):
        raise WeightError(list(w), "need exactly one weight per state")
    if np.any(w < 0) or abs(w.sum() - 1.0) > WEIGHT_TOL:
        raise WeightError(list(w))
    worlds = states[0].worlds
    for s in states[1:]:
        if s.worlds != worlds:
            raise UnknownWorldError("all mixed states must share the same world list")
    probs = w @ np.vstack([s.probs for s in states])
    # absorb the rounding of the weighted sum so the result validates
    probs = probs / probs.sum()
    closest: Dict[Tuple[World, FrozenSet[World]], World] = {}
    for s in states:
        closest.update(s.closest or {})
    return FiniteBeliefState(worlds, probs, closest or None)


def closest_map_from_distance(
    worlds: Sequence[World],
    event: Event,
    distance: Callable[[World, World], float],
) -> Dict[Tuple[World, FrozenSet[World]], World]:
    """Derive closest-world assignments for ``event`` from a distance function.

    Ties are broken by the lexicographic order of the world labels (as
    strings), so the map is deterministic even when the minimiser is not
    unique.
    """
    if not event.members:
        raise UnknownWorldError("cannot image on an empty event")
    candidates = sorted(event.members, key=str)
    result: Dict[Tuple[World, FrozenSet[World]], World] = {}
    for world in worlds:
        best = min(candidates, key=lambda c: (distance(world, c), str(c)))
        result[(world, event.members)] = best
    return result


def load_scenario(path: Path) -> Tuple[FiniteBeliefState, Dict[str, Event]]:
    """Read a JSON scenario ``{worlds, probs, events, closest}``.

    ``events`` maps an event name to its member list and ``closest`` maps an
    event name to a ``{world: closest world}`` object.
    """
    data = json.loads(Path(path).read_text())
    return scenario_from_dict(data)


def scenario_from_dict(data: Mapping[str, Any]) -> Tuple[FiniteBeliefState, Dict[str, Event]]:
    worlds = list(data["worlds"])
    events = {
        name: Event.of(members, name) for name, members in data.get("events", {}).items()
    }
    closest: Dict[Tuple[World, FrozenSet[World]], World] = {}
    for name, assignment in data.get("closest", {}).items():
        members = events[name].members
        for world, target in assignment.items():
            closest[(_match_label(worlds, world), members)] = _match_label(worlds, target)
    state = FiniteBeliefState.from_probs(worlds, data["probs"], closest or None)
    return state, events


def scenario_to_dict(state: FiniteBeliefState, events: Mapping[str, Event]) -> Dict[str, Any]:
    closest: Dict[str, Dict[str, Any]] = {}
    for name, event in events.items():
        for (world, members), target in (state.closest or {}).items():
            if members == event.members:
                closest.setdefault(name, {})[str(world)] = target
    return {
        "worlds": list(state.worlds),
        "probs": [float(p) for p in state.probs],
        "events": {name: sorted(e.members, key=str) for name, e in events.items()},
        "closest": closest,
    }


def _match_label(worlds: Sequence[World], raw: Any) -> World:
    # JSON object keys are strings; map them back onto the declared labels
    return next((w for w in worlds if w == raw or str(w) == str(raw)), raw)
