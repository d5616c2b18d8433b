"""Composition operators over (constrained) mechanisms."""

from cdp.composition.handles import (
    MechanismHandle,
    Sampler,
    UnionSample,
    additive_handle,
    compose_basic,
    conditioned_handle,
    disjoint_union_sampler,
    image_of,
    imaged_handle,
    mixture_mechanism,
    postprocess,
)

__all__ = [
    "MechanismHandle",
    "Sampler",
    "UnionSample",
    "additive_handle",
    "compose_basic",
    "conditioned_handle",
    "disjoint_union_sampler",
    "image_of",
    "imaged_handle",
    "mixture_mechanism",
    "postprocess",
]
