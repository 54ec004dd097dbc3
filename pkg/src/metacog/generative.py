"""Forward model: scene prior, detector simulation and the detection likelihood."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gammaln, xlog1py, xlogy

from .core import (
    Detection2D,
    FrameObservation,
    Object3D,
    SceneData,
    Theta,
    WorldState,
    diff_world_detections,
)
from .geometry import CameraIntrinsics, CameraPose, RoomBounds, project


@dataclass(frozen=True)
class ScenePrior:
    """Prior over world states.

    Object count is geometric on {0, 1, ...} with ``P(N=n) = p (1-p)**n``;
    categories are uniform; positions are uniform in ``bounds`` and every
    pair of objects is penalised by ``1 - exp(-d**2 / (2 * repulsion_var))``.
    """

    n_categories: int = 5
    count_p: float = 0.9
    repulsion_var: float = 1.0
    bounds: RoomBounds = field(default_factory=RoomBounds)

    def __post_init__(self):
        if not 0.0 < self.count_p < 1.0:
            raise ValueError("count_p must lie in (0, 1)")
        if self.repulsion_var <= 0:
            raise ValueError("repulsion_var must be positive")
        if self.n_categories < 1:
            raise ValueError("need at least one category")


@dataclass(frozen=True)
class NoiseModel:
    """Gaussian pixel noise of matched detections and the matching radius (pixels)."""

    sigma_xy: float = 200.0
    radius: float = 200.0

    def __post_init__(self):
        if self.sigma_xy <= 0 or self.radius <= 0:
            raise ValueError("sigma_xy and radius must be positive")


def world_log_prior(world: WorldState, prior: ScenePrior) -> float:
    n = len(world)
    logp = math.log(prior.count_p) + n * math.log1p(-prior.count_p)
    if n == 0:
        return logp
    pos = world.positions()
    if any(c >= prior.n_categories for c in world.categories()) or not np.all(prior.bounds.contains(pos)):
        return -math.inf
    logp -= n * (math.log(prior.n_categories) + math.log(prior.bounds.volume))
    if n > 1:
        diff = pos[:, None, :] - pos[None, :, :]
        d2 = np.sum(diff**2, axis=-1)[np.triu_indices(n, k=1)]
        with np.errstate(divide="ignore"):
            logp += float(np.sum(np.log1p(-np.exp(-d2 / (2.0 * prior.repulsion_var)))))
    return logp


def sample_world(prior: ScenePrior, rng: np.random.Generator) -> WorldState:
    """Draw a world from the prior, ignoring the pairwise repulsion."""
    n = int(rng.geometric(prior.count_p)) - 1
    cats = rng.integers(0, prior.n_categories, size=n)
    pos = rng.uniform(prior.bounds.low, prior.bounds.high, size=(n, 3))
    return WorldState(tuple(Object3D(tuple(p), int(c)) for p, c in zip(pos, cats)))


def simulate_detections(
    world: WorldState,
    theta: Theta,
    poses: Sequence[CameraPose],
    intr: CameraIntrinsics,
    noise: NoiseModel,
    rng: np.random.Generator,
    max_per_object: int = 20,
) -> list[FrameObservation]:
    """Run a synthetic detector with rates ``theta`` over every camera pose.

    Per frame and category, ``Poisson(lambda_c)`` hallucinations land
    uniformly on the image.  Each visible object yields a geometric number of
    detections (capped at ``max_per_object``), each displaced by isotropic
    Gaussian noise of ``noise.sigma_xy`` pixels.
    """
    n_cat = theta.n_categories
    frames = []
    for pose in poses:
        dets = []
        counts = rng.poisson(theta.hallucination)
        for c in range(n_cat):
            for _ in range(int(counts[c])):
                dets.append(Detection2D(rng.uniform(0, intr.width), rng.uniform(0, intr.height), c))
        for obj in world.objects:
            px = project(obj.position, pose, intr)
            if px is None or not (0 <= px[0] <= intr.width and 0 <= px[1] <= intr.height):
                continue
            # numpy's geometric counts trials up to the first success
            n = min(int(rng.geometric(1.0 - theta.detection[obj.category])) - 1, max_per_object)
            offsets = rng.normal(0.0, noise.sigma_xy, size=(n, 2))
            for dx, dy in offsets:
                dets.append(Detection2D(px[0] + dx, px[1] + dy, obj.category))
        order = rng.permutation(len(dets))
        frames.append(FrameObservation(pose, tuple(dets[i] for i in order)))
    return frames


def frame_log_likelihood(
    frame: FrameObservation,
    world: WorldState,
    theta: Theta,
    intr: CameraIntrinsics,
    noise: NoiseModel,
) -> float:
    """Log-probability of one frame's detections given a world and detector rates."""
    lam = theta.hallucination
    p = theta.detection
    diff = diff_world_detections(world, frame, noise.radius, intr, theta.n_categories)
    h = diff.hallucinations
    total = float(np.sum(xlogy(h, lam) - lam - gammaln(h + 1)))
    for e in diff.events:
        total += float(xlogy(e.matches, p[e.category]) + xlog1py(1, -p[e.category]))
    d = np.asarray(diff.match_distances)
    total += float(np.sum(-math.log(2 * math.pi * noise.sigma_xy**2) - d**2 / (2 * noise.sigma_xy**2)))
    total -= diff.hallucination_total() * math.log(intr.area)
    return total


def scene_log_likelihood(
    scene: SceneData,
    world: WorldState,
    theta: Theta,
    intr: CameraIntrinsics,
    noise: NoiseModel,
) -> float:
    return float(sum(frame_log_likelihood(f, world, theta, intr, noise) for f in scene.frames))
