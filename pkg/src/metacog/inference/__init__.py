"""Particle-filter inference for the full spatial model."""
from .engine import effective_sample_size, normalized_weights, systematic_resample
from .proposals import (
    DegenerateWeightsError,
    category_weights,
    p_add,
    propose_category,
    propose_location,
    ray_density,
    sample_near_ray,
)
from .smc import (
    FilterConfig,
    InferenceResult,
    Particle,
    SceneDiagnostics,
    estimate_V,
    estimate_v,
    reinfer,
    rejuvenate,
    run_filter,
)

__all__ = [
    "DegenerateWeightsError",
    "FilterConfig",
    "InferenceResult",
    "Particle",
    "SceneDiagnostics",
    "category_weights",
    "effective_sample_size",
    "estimate_V",
    "estimate_v",
    "normalized_weights",
    "p_add",
    "propose_category",
    "propose_location",
    "ray_density",
    "reinfer",
    "rejuvenate",
    "run_filter",
    "sample_near_ray",
    "systematic_resample",
]
