"""Synthetic datasets: faulty presence detectors and closed-loop 3-d scenes.

Seeds: item ``i`` of a dataset built from master seed ``s`` uses
``np.random.default_rng(np.random.SeedSequence(s, spawn_key=(i,)))``, the
same stream as ``SeedSequence(s).spawn(n)[i]``.  Items can therefore be
generated in any order or in parallel with identical results.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import Object3D, SceneData, Theta, WorldState
from .generative import NoiseModel, simulate_detections
from .geometry import CameraIntrinsics, CameraPose, TrajectoryParams, sample_trajectory
from .lightweight import LwDetectorData, LwTheta, LwWorldState, truncated_poisson_pmf


class OvercrowdedError(RuntimeError):
    pass


def item_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


# -- lightweight detectors -----------------------------------------------------


@dataclass(frozen=True)
class LwDatasetParams:
    n_categories: int = 5
    n_worlds: int = 75
    min_frames: int = 5
    max_frames: int = 15
    prior_a: float = 2.0
    prior_b: float = 10.0
    count_rate: float = 1.0
    min_objects: int = 1
    max_objects: int = 5

    def __post_init__(self):
        if self.n_categories < 1 or self.n_worlds < 1:
            raise ValueError("need at least one category and one world")
        if not 1 <= self.min_frames <= self.max_frames:
            raise ValueError("need 1 <= min_frames <= max_frames")
        if not 0 <= self.min_objects <= self.max_objects <= self.n_categories:
            raise ValueError("object-count bounds must fit within the category count")


def sample_lw_detector(rng: np.random.Generator, params: LwDatasetParams = LwDatasetParams()) -> LwTheta:
    draws = rng.beta(params.prior_a, params.prior_b, size=(2, params.n_categories))
    return LwTheta(draws[0], draws[1])


def sample_lw_world(rng: np.random.Generator, params: LwDatasetParams = LwDatasetParams()) -> LwWorldState:
    pmf = truncated_poisson_pmf(params.count_rate, params.min_objects, params.max_objects)
    n = int(rng.choice(pmf.size, p=pmf))
    present = np.zeros(params.n_categories, dtype=bool)
    present[rng.choice(params.n_categories, size=n, replace=False)] = True
    return LwWorldState(present)


def sample_lw_frames(world: LwWorldState, theta: LwTheta, n_frames: int, rng: np.random.Generator) -> np.ndarray:
    """Bernoulli detections: present categories kept w.p. 1-M, absent ones reported w.p. H."""
    p_detect = np.where(world.presence, 1.0 - theta.miss, theta.hallucination)
    return rng.random((n_frames, theta.n_categories)) < p_detect


def synthesize_lw_detector(
    rng: np.random.Generator, params: LwDatasetParams = LwDatasetParams(), detector_id: int = 0, theta: LwTheta | None = None
) -> LwDetectorData:
    theta = theta if theta is not None else sample_lw_detector(rng, params)
    worlds, blocks = [], []
    for _ in range(params.n_worlds):
        world = sample_lw_world(rng, params)
        n_frames = int(rng.integers(params.min_frames, params.max_frames + 1))
        worlds.append(world)
        blocks.append(sample_lw_frames(world, theta, n_frames, rng))
    return LwDetectorData(tuple(blocks), tuple(worlds), theta, detector_id)


def synthesize_lw_dataset(num_detectors: int, seed: int, params: LwDatasetParams = LwDatasetParams()) -> list[LwDetectorData]:
    if num_detectors < 1:
        raise ValueError("num_detectors must be at least 1")
    return [synthesize_lw_detector(item_rng(seed, i), params, detector_id=i) for i in range(num_detectors)]


# -- 3-d scenes ------------------------------------------------------------------

# Moderately faulty synthetic detector over the five default categories.
THETA_TRUE = Theta([0.1, 0.3, 0.2, 0.05, 0.4], [0.7, 0.6, 0.75, 0.5, 0.65])


@dataclass(frozen=True)
class SceneParams:
    n_categories: int = 5
    min_objects: int = 1
    max_objects: int = 3
    min_separation: float = 1.0
    wall_margin: float = 1.0
    object_height: tuple[float, float] = (0.0, 1.0)
    trajectory: TrajectoryParams = field(default_factory=TrajectoryParams)
    max_attempts: int = 10_000

    def __post_init__(self):
        if not 0 <= self.min_objects <= self.max_objects:
            raise ValueError("need 0 <= min_objects <= max_objects")
        if self.min_separation < 0 or self.wall_margin < 0:
            raise ValueError("margins must be non-negative")


def synthesize_3d_scene(
    rng: np.random.Generator, params: SceneParams = SceneParams()
) -> tuple[WorldState, list[CameraPose]]:
    """Objects placed uniformly on the floor area with rejection, plus a camera loop.

    A placement is rejected when two objects are closer than
    ``min_separation`` or an object is closer than ``wall_margin`` to a wall.
    """
    tp = params.trajectory
    n = int(rng.integers(params.min_objects, params.max_objects + 1))
    half_w = tp.room_width / 2.0 - params.wall_margin
    half_d = tp.room_depth / 2.0 - params.wall_margin
    if half_w < 0 or half_d < 0:
        raise OvercrowdedError("wall margin leaves no room for objects")
    for _ in range(params.max_attempts):
        xs = rng.uniform(-half_w, half_w, size=n)
        zs = rng.uniform(-half_d, half_d, size=n)
        ys = rng.uniform(*params.object_height, size=n)
        pos = np.stack([xs, ys, zs], axis=1)
        if n < 2:
            break
        d = np.linalg.norm(pos[:, None] - pos[None], axis=-1)[np.triu_indices(n, 1)]
        if np.all(d >= params.min_separation):
            break
    else:
        raise OvercrowdedError(f"could not place {n} objects after {params.max_attempts} attempts")
    cats = rng.integers(0, params.n_categories, size=n)
    world = WorldState(tuple(Object3D(tuple(p), int(c)) for p, c in zip(pos, cats)))
    return world, sample_trajectory(tp, rng)


def synthesize_3d_dataset(
    num_scenes: int,
    theta_true: Theta = THETA_TRUE,
    seed: int = 0,
    params: SceneParams = SceneParams(),
    intr: CameraIntrinsics = CameraIntrinsics(),
    pixel_noise: float = 20.0,
    max_per_object: int = 20,
) -> list[SceneData]:
    """Closed-loop scenes: sampled worlds and trajectories, detections under ``theta_true``.

    ``pixel_noise`` is the simulated detector's localisation noise; it is
    kept well inside the 200 px matching radius so that hallucinations and
    matches are identifiable from the detections alone.
    """
    if num_scenes < 0:
        raise ValueError("num_scenes must be non-negative")
    noise = NoiseModel(sigma_xy=pixel_noise, radius=max(pixel_noise, 200.0))
    scenes = []
    for i in range(num_scenes):
        rng = item_rng(seed, i)
        world, poses = synthesize_3d_scene(rng, params)
        frames = simulate_detections(world, theta_true, poses, intr, noise, rng, max_per_object)
        scenes.append(SceneData(tuple(frames), world))
    return scenes
