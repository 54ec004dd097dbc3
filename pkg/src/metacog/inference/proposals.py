"""Data-driven proposals for adding and relocating objects."""
from __future__ import annotations

import math

import numpy as np
from scipy.special import pdtr, pdtrc

from ..core import Detection2D, SceneData, Theta
from ..geometry import CameraIntrinsics, CameraPose, RoomBounds, backproject, ray_box_segment


class DegenerateWeightsError(ValueError):
    pass


def p_add(theta: Theta, k: int, tail: str = "upper") -> float:
    """Probability of proposing an object birth.

    With ``lam = sum(theta.hallucination)``, the default ``tail="upper"``
    returns ``0.5 * P(X > k)`` for ``X ~ Poisson(lam)``, i.e.
    ``0.5 * (1 - exp(-lam) * sum_{i<=k} lam**i / i!)``.  ``tail="lower"``
    returns ``0.5 * P(X <= k)``, which proposes births often when there are
    more detections than hallucinations can explain.
    """
    if k < 0:
        raise ValueError("detection count must be non-negative")
    lam = float(np.sum(theta.hallucination))
    return float(p_add_array(np.array([lam]), k, tail)[0])


def p_add_array(lam_total: np.ndarray, k: int, tail: str = "upper") -> np.ndarray:
    lam_total = np.asarray(lam_total, dtype=float)
    if tail == "upper":
        p = pdtrc(k, lam_total)
    elif tail == "lower":
        p = pdtr(k, lam_total)
    else:
        raise ValueError(f"tail must be 'upper' or 'lower', got {tail!r}")
    return 0.5 * p


def category_weights(counts: np.ndarray, lam: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Unnormalised category proposal weights ``k_c p_c / (p_c + 1 - exp(-lam_c))``.

    ``counts`` are per-category detection counts in the scene, floored at 1.
    Broadcasts over leading particle axes of ``lam`` and ``p``.
    """
    k = np.maximum(np.asarray(counts, dtype=float), 1.0)
    denom = p - np.expm1(-lam)
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(p > 0, k * p / denom, 0.0)
    return w


def scene_category_counts(scene: SceneData, n_categories: int) -> np.ndarray:
    counts = np.zeros(n_categories, dtype=int)
    for frame in scene.frames:
        for det in frame.detections:
            counts[det.category] += 1
    return counts


def propose_category(scene: SceneData, theta: Theta, rng: np.random.Generator) -> int:
    counts = scene_category_counts(scene, theta.n_categories)
    w = category_weights(counts, theta.hallucination, theta.detection)
    total = w.sum()
    if not total > 0:
        raise DegenerateWeightsError("every category has zero proposal weight (all detection rates are 0)")
    return int(rng.choice(w.size, p=w / total))


def sample_near_ray(origin, direction, t0, t1, sigma: float, rng: np.random.Generator, size=None):
    """Uniform depth on ``[t0, t1]`` plus isotropic Gaussian offset perpendicular to the ray."""
    origin = np.asarray(origin, dtype=float)
    direction = np.asarray(direction, dtype=float)
    shape = np.broadcast_shapes(np.shape(t0), np.shape(t1)) if size is None else (size,)
    t = rng.uniform(t0, t1, size=shape)
    g = rng.normal(0.0, sigma, size=shape + (3,))
    g -= np.sum(g * direction, axis=-1, keepdims=True) * direction
    return origin + t[..., None] * direction + g


def ray_density(points, origin, direction, t0, t1, sigma: float) -> np.ndarray:
    """Density of :func:`sample_near_ray` at ``points``.

    Depth and perpendicular offset are orthonormal coordinates, so the density
    factorises exactly into the uniform depth term and a 2-d Gaussian.
    """
    r = np.asarray(points, dtype=float) - origin
    t = np.sum(r * direction, axis=-1)
    perp2 = np.maximum(np.sum(r * r, axis=-1) - t * t, 0.0)
    length = t1 - t0
    with np.errstate(divide="ignore", invalid="ignore"):
        dens = np.exp(-perp2 / (2 * sigma**2)) / (2 * math.pi * sigma**2) / length
    return np.where((t >= t0) & (t <= t1) & (length > 0), dens, 0.0)


def propose_location(
    detection: Detection2D | None,
    pose: CameraPose | None,
    intr: CameraIntrinsics,
    bounds: RoomBounds,
    rng: np.random.Generator,
    ray_sigma2: float = 0.01,
) -> np.ndarray:
    """Sample a 3-d location for a new object.

    With probability 0.5 (always, when there is no usable detection) the
    point is uniform in ``bounds``.  Otherwise it is drawn near the ray
    through ``detection``: uniform depth along the part of the ray inside the
    room, Gaussian perpendicular offset with variance ``ray_sigma2``.
    """
    if not isinstance(bounds, RoomBounds):
        bounds = RoomBounds(*bounds)
    use_ray = rng.random() < 0.5
    uniform = rng.uniform(bounds.low, bounds.high)
    if detection is None or pose is None or not use_ray:
        return uniform
    ray = backproject((detection.x, detection.y), pose, intr)
    t0, t1, hit = ray_box_segment(ray.origin, ray.direction, bounds)
    if not hit:
        return uniform
    return sample_near_ray(ray.origin, ray.direction, float(t0), float(t1), math.sqrt(ray_sigma2), rng, size=1)[0]
