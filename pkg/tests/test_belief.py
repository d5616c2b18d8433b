"""Tests for finite belief states."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

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
    scenario_to_dict,
)
from cdp.core.errors import WeightError

WORLDS = ["w1", "w2", "w3", "w4"]
BANANA = Event.of(["w3", "w4"], "banana")


@pytest.fixture
def box() -> FiniteBeliefState:
    state = FiniteBeliefState.from_probs(WORLDS, [0.0, 0.7, 0.3, 0.0])
    return state.with_closest({("w1", BANANA): "w3", ("w2", BANANA): "w4"})


class TestConditioning:
    def test_banana_box(self, box):
        result = condition_finite(box, BANANA)
        np.testing.assert_allclose(result.probs, [0, 0, 1, 0], atol=1e-12)

    def test_event_containing_support_is_identity(self, box):
        result = condition_finite(box, Event.of(["w2", "w3"]))
        np.testing.assert_allclose(result.probs, box.probs, atol=1e-12)

    def test_zero_probability_event(self, box):
        with pytest.raises(ZeroProbabilityError):
            condition_finite(box, Event.of(["w1", "w4"]))

    def test_unknown_world(self, box):
        with pytest.raises(UnknownWorldError):
            condition_finite(box, Event.of(["w9"]))

    def test_uniform_on_three_of_four(self):
        state = FiniteBeliefState.uniform(WORLDS)
        result = condition_finite(state, Event.of(["w1", "w2", "w3"]))
        np.testing.assert_allclose(result.probs, [1 / 3, 1 / 3, 1 / 3, 0], atol=1e-12)


class TestImaging:
    def test_banana_box(self, box):
        result = image_finite(box, BANANA)
        np.testing.assert_allclose(result.probs, [0, 0, 0.3, 0.7], atol=1e-12)

    def test_missing_closest_world(self):
        state = FiniteBeliefState.from_probs(WORLDS, [0.0, 0.7, 0.3, 0.0])
        with pytest.raises(MissingClosestWorldError):
            image_finite(state, BANANA)

    def test_point_mass_moves_to_closest(self):
        state = FiniteBeliefState.point_mass(WORLDS, "w1")
        state = state.with_closest({("w1", BANANA): "w4"})
        result = image_finite(state, BANANA)
        assert result.as_dict() == {"w1": 0.0, "w2": 0.0, "w3": 0.0, "w4": 1.0}

    def test_closest_map_breaks_ties_lexicographically(self):
        worlds = [0, 1, 2, 3]
        event = Event.of([1, 3])
        closest = closest_map_from_distance(worlds, event, lambda a, b: abs(a - b))
        # world 2 is equidistant from 1 and 3
        assert closest[(2, event.members)] == 1
        assert closest[(0, event.members)] == 1
        assert closest[(3, event.members)] == 3


class TestMixtures:
    def test_weights_must_sum_to_one(self, box):
        with pytest.raises(WeightError):
            mix_finite([box, box], [0.5, 0.6])

    def test_negative_weight(self, box):
        with pytest.raises(WeightError):
            mix_finite([box, box], [1.5, -0.5])

    def test_imaging_commutes_with_mixture(self, box):
        other = FiniteBeliefState.from_probs(WORLDS, [0.5, 0.1, 0.2, 0.2]).with_closest(box.closest)
        mixed = mix_finite([box, other], [0.25, 0.75])
        left = image_finite(mixed, BANANA)
        right = mix_finite([image_finite(box, BANANA), image_finite(other, BANANA)], [0.25, 0.75])
        np.testing.assert_allclose(left.probs, right.probs, atol=1e-12)


class TestScenarioFiles:
    def test_load_and_dump(self, tmp_path, box):
        path = tmp_path / "box.json"
        path.write_text(json.dumps(scenario_to_dict(box, {"banana": BANANA})))
        state, events = load_scenario(path)
        assert state.worlds == tuple(WORLDS)
        np.testing.assert_allclose(image_finite(state, events["banana"]).probs, [0, 0, 0.3, 0.7])

    def test_integer_worlds_survive_json_keys(self, tmp_path):
        payload = {
            "worlds": [1, 2, 3],
            "probs": [0.5, 0.5, 0.0],
            "events": {"c": [3]},
            "closest": {"c": {"1": 3, "2": 3}},
        }
        path = tmp_path / "ints.json"
        path.write_text(json.dumps(payload))
        state, events = load_scenario(path)
        assert image_finite(state, events["c"]).as_dict() == {1: 0.0, 2: 0.0, 3: 1.0}


@st.composite
def belief_states(draw):
    n = draw(st.integers(min_value=2, max_value=8))
    raw = draw(st.lists(st.floats(min_value=0.01, max_value=1.0), min_size=n, max_size=n))
    probs = np.asarray(raw) / np.sum(raw)
    # renormalize once more so the sum is within float tolerance of one
    probs = probs / probs.sum()
    subset = draw(st.lists(st.integers(min_value=0, max_value=n - 1), min_size=1, max_size=n, unique=True))
    return FiniteBeliefState.from_probs(list(range(n)), probs), Event.of(subset)


@settings(max_examples=50, deadline=None)
@given(belief_states())
def test_conditioning_is_supported_and_proportional(case):
    state, event = case
    result = condition_finite(state, event)
    inside = state.mask(event)
    assert np.all(result.probs[~inside] == 0)
    ratio = result.probs[inside] / state.probs[inside]
    np.testing.assert_allclose(ratio, ratio[0], rtol=1e-9)


@settings(max_examples=50, deadline=None)
@given(belief_states())
def test_imaging_moves_mass_into_event(case):
    state, event = case
    closest = closest_map_from_distance(state.worlds, event, lambda a, b: abs(a - b))
    result = image_finite(state.with_closest(closest), event)
    assert result.probability(event) == pytest.approx(1.0, abs=1e-12)
