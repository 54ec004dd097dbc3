"""Sequential Monte Carlo over scenes with resample-move rejuvenation."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ..core import MetaBeliefs, SceneData, Theta, WorldState, prior_beliefs
from ..generative import NoiseModel, ScenePrior
from ..geometry import CameraIntrinsics
from .engine import (
    MoveStats,
    ParticleSet,
    SceneCache,
    effective_sample_size,
    location_move,
    normalized_weights,
    sample_prior_worlds,
    sample_theta_arrays,
    systematic_resample,
    theta_move,
    world_edit_move,
)


@dataclass(frozen=True)
class FilterConfig:
    num_particles: int = 100
    sweeps: int = 200
    location_sigma: float = 0.01
    ray_sigma2: float = 0.01
    ess_threshold: float = 0.5
    seed: int | None = 0
    # "upper" is P(X > k) for X ~ Poisson(sum lambda); "lower" is P(X <= k).
    # Births need "lower": see p_add.
    p_add_tail: str = "lower"
    scene_prior: ScenePrior = field(default_factory=ScenePrior)

    def __post_init__(self):
        if int(self.num_particles) < 1:
            raise ValueError("num_particles must be at least 1")
        if int(self.sweeps) < 0:
            raise ValueError("sweeps must be non-negative")
        if self.location_sigma <= 0 or self.ray_sigma2 <= 0:
            raise ValueError("proposal scales must be positive")
        if not 0.0 <= self.ess_threshold <= 1.0:
            raise ValueError("ess_threshold must lie in [0, 1]")
        if self.p_add_tail not in ("upper", "lower"):
            raise ValueError("p_add_tail must be 'upper' or 'lower'")


@dataclass
class Particle:
    world: WorldState
    theta_current: Theta
    theta_previous: Theta
    beliefs: MetaBeliefs
    log_weight: float = 0.0
    previous_beliefs: MetaBeliefs | None = None


@dataclass
class SceneDiagnostics:
    ess: float
    resampled: bool
    world_acceptance: float
    location_acceptance: float
    theta_acceptance: float
    mean_objects: float


@dataclass
class InferenceResult:
    worlds: list[WorldState]
    theta_hats: list[Theta]
    diagnostics: list[SceneDiagnostics]
    particles: list[Particle] = field(default_factory=list, repr=False)

    @property
    def final_theta(self) -> Theta:
        return self.theta_hats[-1]


def _resolve(cfg, intr, noise):
    return cfg or FilterConfig(), intr or CameraIntrinsics(), noise or NoiseModel()


def _check_scene(scene: SceneData, n_categories: int):
    if not isinstance(scene, SceneData) or scene.n_frames == 0:
        raise ValueError("every scene needs at least one frame")


def _sweep(ps, cache, rng, cfg, stats, move_theta=True):
    world_edit_move(ps, cache, rng, cfg.p_add_tail, stats[0])
    location_move(ps, cache, rng, cfg.location_sigma, stats[1])
    if move_theta:
        theta_move(ps, cache, rng, stats[2])


def _particle_set_from(particles: Sequence[Particle], C: int) -> ParticleSet:
    ps = ParticleSet(len(particles), C, K=max(4, max(len(p.world) for p in particles) + 1))
    for m, part in enumerate(particles):
        ps.set_world(m, part.world)
        ps.lam[m] = part.theta_current.hallucination
        ps.p[m] = part.theta_current.detection
        ps.lam_prev[m] = part.theta_previous.hallucination
        ps.p_prev[m] = part.theta_previous.detection
        prev = part.previous_beliefs or part.beliefs
        for i, name in enumerate(("gamma_alpha", "gamma_beta", "beta_alpha", "beta_beta")):
            ps.beliefs[i][m] = getattr(part.beliefs, name)
            ps.prev_beliefs[i][m] = getattr(prev, name)
        ps.log_weight[m] = part.log_weight
    return ps


def _particles_from(ps: ParticleSet) -> list[Particle]:
    return [
        Particle(
            ps.world(m),
            ps.theta(m),
            ps.theta_prev(m),
            ps.belief(m),
            float(ps.log_weight[m]),
            ps.belief(m, previous=True),
        )
        for m in range(ps.M)
    ]


def rejuvenate(
    particle: Particle,
    scene: SceneData,
    cfg: FilterConfig | None = None,
    rng: np.random.Generator | None = None,
    intr: CameraIntrinsics | None = None,
    noise: NoiseModel | None = None,
) -> Particle:
    """Run ``cfg.sweeps`` three-step MH sweeps on one particle and return the final state."""
    cfg, intr, noise = _resolve(cfg, intr, noise)
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    if cfg.sweeps == 0:
        return particle
    C = particle.theta_current.n_categories
    prior = replace(cfg.scene_prior, n_categories=C)
    cache = SceneCache(scene, intr, noise, prior, cfg.ray_sigma2)
    ps = _particle_set_from([particle], C)
    ps.rescore(cache)
    stats = (MoveStats(), MoveStats(), MoveStats())
    for _ in range(cfg.sweeps):
        _sweep(ps, cache, rng, cfg, stats)
    return _particles_from(ps)[0]


def estimate_v(particles: Sequence[Particle]) -> Theta:
    """Weight-normalised average of the particles' current rate samples."""
    if len(particles) == 0:
        raise ValueError("need at least one particle")
    w = normalized_weights(np.array([p.log_weight for p in particles]))
    lam = np.sum(w[:, None] * np.array([p.theta_current.hallucination for p in particles]), axis=0)
    p = np.sum(w[:, None] * np.array([p.theta_current.detection for p in particles]), axis=0)
    return Theta(lam, p)


estimate_V = estimate_v


def _estimate_arrays(ps: ParticleSet) -> Theta:
    w = normalized_weights(ps.log_weight)
    return Theta(w @ ps.lam, np.minimum(w @ ps.p, 1.0 - 1e-12))


def _point_estimate(ps: ParticleSet, cache: SceneCache) -> WorldState:
    # after resampling the weights tie; the log joint breaks ties
    joint = ps.loglik(cache) + ps.log_prior
    order = np.lexsort((-joint, -ps.log_weight))
    return ps.world(int(order[0]))


def run_filter(
    scenes: Sequence[SceneData],
    cfg: FilterConfig | None = None,
    intr: CameraIntrinsics | None = None,
    noise: NoiseModel | None = None,
    n_categories: int | None = None,
    beliefs: MetaBeliefs | None = None,
) -> InferenceResult:
    """Infer worlds scene by scene while learning the detector's rates.

    Each particle carries its own beliefs.  Per scene: draw fresh worlds from
    the scene prior and rates from the beliefs, weight by the scene
    likelihood, resample when the ESS falls below the threshold, rejuvenate,
    then fold the diff between each particle's world and the detections into
    that particle's beliefs.
    """
    cfg, intr, noise = _resolve(cfg, intr, noise)
    scenes = list(scenes)
    if not scenes:
        raise ValueError("run_filter needs at least one scene")
    if beliefs is None:
        beliefs = prior_beliefs(n_categories or cfg.scene_prior.n_categories)
    C = beliefs.n_categories
    for s in scenes:
        _check_scene(s, C)
    prior = replace(cfg.scene_prior, n_categories=C)
    rng = np.random.default_rng(cfg.seed)
    M = int(cfg.num_particles)
    ps = ParticleSet(M, C)
    for i, name in enumerate(("gamma_alpha", "gamma_beta", "beta_alpha", "beta_beta")):
        ps.beliefs[i][:] = getattr(beliefs, name)
        ps.prev_beliefs[i][:] = getattr(beliefs, name)

    worlds, thetas, diags = [], [], []
    for scene in scenes:
        cache = SceneCache(scene, intr, noise, prior, cfg.ray_sigma2)
        sample_prior_worlds(ps, prior, rng)
        ps.lam, ps.p = sample_theta_arrays(ps.beliefs, rng)
        ps.lam_prev, ps.p_prev = sample_theta_arrays(ps.prev_beliefs, rng)
        ps.rescore(cache)
        ps.log_weight = ps.log_weight + ps.loglik(cache)
        ess = effective_sample_size(ps.log_weight)
        resampled = ess < cfg.ess_threshold * M
        if resampled:
            ps.take(systematic_resample(normalized_weights(ps.log_weight), rng))
            ps.log_weight[:] = 0.0
        stats = (MoveStats(), MoveStats(), MoveStats())
        for _ in range(cfg.sweeps):
            _sweep(ps, cache, rng, cfg, stats)

        worlds.append(_point_estimate(ps, cache))
        thetas.append(_estimate_arrays(ps))
        diags.append(
            SceneDiagnostics(
                ess, bool(resampled), stats[0].rate, stats[1].rate, stats[2].rate, float(ps.active.sum(1).mean())
            )
        )
        # conjugate update from each particle's own diff
        s = ps.scores
        ps.prev_beliefs = [b.copy() for b in ps.beliefs]
        ga, gb, ba, bb = ps.beliefs
        ps.beliefs = [ga + s.halluc, gb + cache.T, ba + s.matched, bb + s.events]
        # weights carry over: the next scene's likelihood is the incremental weight
    return InferenceResult(worlds, thetas, diags, _particles_from(ps))


def reinfer(
    scenes: Sequence[SceneData],
    theta_hat: Theta,
    cfg: FilterConfig | None = None,
    intr: CameraIntrinsics | None = None,
    noise: NoiseModel | None = None,
) -> list[WorldState]:
    """Infer each scene's world with the rates fixed at ``theta_hat``.

    No rate moves and no belief updates; every scene is an independent
    resample-move run.  With ``theta_hat = expected_theta(prior_beliefs(C))``
    this is the lesioned model.
    """
    cfg, intr, noise = _resolve(cfg, intr, noise)
    scenes = list(scenes)
    C = theta_hat.n_categories
    prior = replace(cfg.scene_prior, n_categories=C)
    rng = np.random.default_rng(cfg.seed)
    M = int(cfg.num_particles)
    out = []
    for scene in scenes:
        _check_scene(scene, C)
        cache = SceneCache(scene, intr, noise, prior, cfg.ray_sigma2)
        ps = ParticleSet(M, C)
        ps.lam[:] = theta_hat.hallucination
        ps.p[:] = theta_hat.detection
        sample_prior_worlds(ps, prior, rng)
        ps.rescore(cache)
        ps.log_weight = ps.loglik(cache)
        if effective_sample_size(ps.log_weight) < cfg.ess_threshold * M:
            ps.take(systematic_resample(normalized_weights(ps.log_weight), rng))
            ps.log_weight[:] = 0.0
        stats = (MoveStats(), MoveStats(), MoveStats())
        for _ in range(cfg.sweeps):
            _sweep(ps, cache, rng, cfg, stats, move_theta=False)
        out.append(_point_estimate(ps, cache))
    return out
