"""Vectorised particle state and Metropolis-Hastings kernels for the full model.

All particles of a filter are advanced in lock-step: worlds live in padded
arrays ``pos (M, K, 3)``, ``cat (M, K)``, ``active (M, K)`` and every
proposal is made, scored and accepted for all particles at once.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, xlog1py, xlogy

from ..core import MetaBeliefs, Object3D, SceneData, Theta, WorldState
from ..generative import NoiseModel, ScenePrior
from ..geometry import CameraIntrinsics, pose_arrays, project_many, ray_box_segment
from .proposals import category_weights, p_add_array, ray_density, sample_near_ray

_P_MAX = 1.0 - 1e-12


class SceneCache:
    """Per-scene arrays reused by every likelihood evaluation."""

    def __init__(
        self,
        scene: SceneData,
        intr: CameraIntrinsics,
        noise: NoiseModel,
        prior: ScenePrior,
        ray_sigma2: float = 0.01,
    ):
        self.intr = intr
        self.noise = noise
        self.prior = prior
        self.n_categories = C = prior.n_categories
        self.frames = pose_arrays([f.camera for f in scene.frames])
        self.T = T = scene.n_frames
        xs, cats, fidx = [], [], []
        for t, frame in enumerate(scene.frames):
            for det in frame.detections:
                if det.category >= C:
                    raise ValueError(f"detection category {det.category} outside table of size {C}")
                xs.append((det.x, det.y))
                cats.append(det.category)
                fidx.append(t)
        self.J = J = len(xs)
        self.det_xy = np.array(xs, dtype=float).reshape(J, 2)
        self.det_cat = np.array(cats, dtype=int)
        self.det_frame = np.array(fidx, dtype=int)
        self.counts = np.bincount(self.det_cat, minlength=C)
        self.k_total = J
        self.frame_onehot = np.zeros((J, T))
        self.frame_onehot[np.arange(J), self.det_frame] = 1.0
        self.ct_onehot = np.zeros((J, C * T))
        self.ct_onehot[np.arange(J), self.det_cat * T + self.det_frame] = 1.0

        self.log_area = math.log(intr.area)
        self.gauss_const = -math.log(2 * math.pi * noise.sigma_xy**2)

        # back-projected rays for data-driven locations
        self.ray_sigma = math.sqrt(ray_sigma2)
        self.ray_origin = self.frames["position"][self.det_frame]
        f = intr.focal_px
        cx, cy = intr.center
        fr = self.frames
        d = (
            fr["forward"][self.det_frame]
            + ((self.det_xy[:, :1] - cx) / f) * fr["right"][self.det_frame]
            - ((self.det_xy[:, 1:] - cy) / f) * fr["up"][self.det_frame]
        ).reshape(J, 3)
        self.ray_dir = d / np.linalg.norm(d, axis=-1, keepdims=True) if J else d
        t0, t1, hit = ray_box_segment(self.ray_origin, self.ray_dir, prior.bounds)
        self.ray_t0 = np.where(hit, t0, 0.0)
        self.ray_t1 = np.where(hit, t1, 0.0)
        self.ray_hit = hit if J else np.zeros(0, dtype=bool)
        self.cand_count = np.zeros(C, dtype=int)
        lists = []
        for c in range(C):
            idx = np.flatnonzero((self.det_cat == c) & self.ray_hit)
            self.cand_count[c] = idx.size
            lists.append(idx)
        width = max(1, int(self.cand_count.max()) if C else 1)
        self.cand_idx = np.zeros((C, width), dtype=int)
        for c, idx in enumerate(lists):
            self.cand_idx[c, : idx.size] = idx

        self.log_volume = math.log(prior.bounds.volume)
        self.low = np.asarray(prior.bounds.low)
        self.high = np.asarray(prior.bounds.high)

    # -- location proposal -------------------------------------------------
    def sample_locations(self, cats: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """Mixture proposal: uniform in the room or near a ray of a same-category detection."""
        M = cats.size
        uniform = rng.uniform(self.low, self.high, size=(M, 3))
        use_ray = rng.random(M) < 0.5
        pick = rng.random(M)
        if self.J == 0:
            return uniform
        n = self.cand_count[cats]
        use_ray &= n > 0
        j = self.cand_idx[cats, np.minimum((pick * n).astype(int), np.maximum(n - 1, 0))]
        ray_pts = sample_near_ray(
            self.ray_origin[j], self.ray_dir[j], self.ray_t0[j], self.ray_t1[j], self.ray_sigma, rng
        )
        return np.where(use_ray[:, None], ray_pts, uniform)

    def log_ray_density(self, points: np.ndarray, cats: np.ndarray) -> np.ndarray:
        """Log of the average ray density over same-category detections (−inf if none)."""
        M = cats.size
        if self.J == 0:
            return np.full(M, -np.inf)
        dens = ray_density(
            points[:, None, :],
            self.ray_origin[None],
            self.ray_dir[None],
            self.ray_t0[None],
            self.ray_t1[None],
            self.ray_sigma,
        )
        mask = (self.det_cat[None, :] == cats[:, None]) & self.ray_hit[None, :]
        n = self.cand_count[cats]
        total = np.sum(np.where(mask, dens, 0.0), axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(n > 0, np.log(total) - np.log(np.maximum(n, 1)), -np.inf)

    def log_location_density(self, points: np.ndarray, cats: np.ndarray) -> np.ndarray:
        inside = np.all((points >= self.low) & (points <= self.high), axis=-1)
        log_uniform = np.where(inside, -self.log_volume, -np.inf)
        log_ray = self.log_ray_density(points, cats)
        has_ray = self.cand_count[cats] > 0 if self.J else np.zeros(cats.size, dtype=bool)
        mixed = np.logaddexp(log_uniform, log_ray) + math.log(0.5)
        return np.where(has_ray, mixed, log_uniform)


@dataclass
class Scores:
    base: np.ndarray  # theta-independent part of the log-likelihood (M,)
    halluc: np.ndarray  # hallucination counts per category (M, C)
    matched: np.ndarray  # matched detections over in-view events (M, C)
    events: np.ndarray  # in-view events (M, C)
    obj_matches: np.ndarray  # detections matched to each object in the scene (M, K)

    def take(self, idx):
        return Scores(*(getattr(self, f)[idx] for f in ("base", "halluc", "matched", "events", "obj_matches")))


def theta_loglik(s: Scores, T: int, lam: np.ndarray, p: np.ndarray) -> np.ndarray:
    return np.sum(theta_terms(s, T, lam, p), axis=(1, 2))


def theta_terms(s: Scores, T: int, lam: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Per-element log-likelihood terms, shape (M, 2, C): hallucination then detection."""
    with np.errstate(divide="ignore", invalid="ignore"):
        t_lam = xlogy(s.halluc, lam) - T * lam
        t_p = xlogy(s.matched, p) + xlog1py(s.events, -p)
    return np.stack([t_lam, t_p], axis=1)


def score_worlds(cache: SceneCache, pos, cat, active) -> Scores:
    """Match detections to each particle's world and collect sufficient statistics."""
    M, K = cat.shape
    C, T, J = cache.n_categories, cache.T, cache.J
    px, vis = project_many(pos, cache.frames, cache.intr)
    vis &= active[..., None]
    onehot = np.zeros((M, K, C))
    np.put_along_axis(onehot, np.clip(cat, 0, C - 1)[..., None], 1.0, axis=-1)
    onehot *= active[..., None]
    events = np.einsum("mk,mkc->mc", vis.sum(-1).astype(float), onehot)
    if J == 0:
        zeros = np.zeros((M, C))
        return Scores(np.zeros(M), zeros, zeros.copy(), events, np.zeros((M, K)))

    pj = px[:, :, cache.det_frame, :]
    ok = vis[:, :, cache.det_frame] & (cat[:, :, None] == cache.det_cat[None, None, :])
    dist = np.hypot(pj[..., 0] - cache.det_xy[:, 0], pj[..., 1] - cache.det_xy[:, 1])
    dist = np.where(ok, dist, np.inf)
    best = np.argmin(dist, axis=1)
    dmin = np.take_along_axis(dist, best[:, None, :], axis=1)[:, 0, :]
    matched = dmin <= cache.noise.radius
    assign = (best[:, None, :] == np.arange(K)[None, :, None]) & matched[:, None, :]
    obj_matches = assign.sum(-1).astype(float)
    matched_c = np.einsum("mk,mkc->mc", obj_matches, onehot)
    h_ct = (~matched).astype(float) @ cache.ct_onehot
    halluc = h_ct.reshape(M, C, T).sum(-1)
    sig2 = cache.noise.sigma_xy**2
    d2 = np.where(matched, dmin, 0.0) ** 2
    spatial = np.sum(np.where(matched, cache.gauss_const - d2 / (2 * sig2), -cache.log_area), axis=1)
    base = spatial - gammaln(h_ct + 1).sum(-1)
    return Scores(base, halluc, matched_c, events, obj_matches)


def world_log_prior_arrays(prior: ScenePrior, pos, cat, active) -> np.ndarray:
    n = active.sum(1)
    lp = math.log(prior.count_p) + n * math.log1p(-prior.count_p)
    lp = lp - n * (math.log(prior.n_categories) + math.log(prior.bounds.volume))
    inside = np.all((pos >= prior.bounds.low) & (pos <= prior.bounds.high), axis=-1)
    ok = np.all(inside | ~active, axis=1) & np.all((cat < prior.n_categories) | ~active, axis=1)
    K = cat.shape[1]
    if K > 1:
        diff = pos[:, :, None, :] - pos[:, None, :, :]
        d2 = np.sum(diff**2, axis=-1)
        pair = active[:, :, None] & active[:, None, :] & np.triu(np.ones((K, K), dtype=bool), 1)
        with np.errstate(divide="ignore"):
            terms = np.log1p(-np.exp(-d2 / (2 * prior.repulsion_var)))
        lp = lp + np.sum(np.where(pair, terms, 0.0), axis=(1, 2))
    return np.where(ok, lp, -np.inf)


class ParticleSet:
    """Mutable batch of particles sharing one scene."""

    def __init__(self, M: int, C: int, K: int = 4):
        self.M, self.C = M, C
        self.pos = np.zeros((M, K, 3))
        self.cat = np.zeros((M, K), dtype=int)
        self.active = np.zeros((M, K), dtype=bool)
        self.lam = np.ones((M, C))
        self.p = np.full((M, C), 0.5)
        self.lam_prev = self.lam.copy()
        self.p_prev = self.p.copy()
        ones = np.ones((M, C))
        self.beliefs = [ones.copy() for _ in range(4)]
        self.prev_beliefs = [ones.copy() for _ in range(4)]
        self.log_weight = np.zeros(M)
        self.scores: Scores | None = None
        self.log_prior = np.zeros(M)

    @property
    def K(self) -> int:
        return self.cat.shape[1]

    def ensure_free_slot(self, extra: int = 1):
        need = int(self.active.sum(1).max()) + extra
        if need > self.K:
            grow = max(need, 2 * self.K) - self.K
            M = self.M
            self.pos = np.concatenate([self.pos, np.zeros((M, grow, 3))], axis=1)
            self.cat = np.concatenate([self.cat, np.zeros((M, grow), dtype=int)], axis=1)
            self.active = np.concatenate([self.active, np.zeros((M, grow), dtype=bool)], axis=1)
            if self.scores is not None:
                self.scores.obj_matches = np.concatenate([self.scores.obj_matches, np.zeros((M, grow))], axis=1)

    def take(self, idx: np.ndarray):
        for name in ("pos", "cat", "active", "lam", "p", "lam_prev", "p_prev", "log_weight", "log_prior"):
            setattr(self, name, getattr(self, name)[idx].copy())
        self.beliefs = [b[idx].copy() for b in self.beliefs]
        self.prev_beliefs = [b[idx].copy() for b in self.prev_beliefs]
        if self.scores is not None:
            self.scores = self.scores.take(idx)

    def rescore(self, cache: SceneCache):
        self.scores = score_worlds(cache, self.pos, self.cat, self.active)
        self.log_prior = world_log_prior_arrays(cache.prior, self.pos, self.cat, self.active)

    def loglik(self, cache: SceneCache) -> np.ndarray:
        return self.scores.base + theta_loglik(self.scores, cache.T, self.lam, self.p)

    # -- conversions ---------------------------------------------------------
    def world(self, m: int) -> WorldState:
        ks = np.flatnonzero(self.active[m])
        return WorldState(tuple(Object3D(tuple(self.pos[m, k]), int(self.cat[m, k])) for k in ks))

    def set_world(self, m: int, world: WorldState):
        self.active[m] = False
        if len(world) > self.K:
            self.ensure_free_slot(len(world) - int(self.active.sum(1).max()))
        for k, obj in enumerate(world.objects):
            self.pos[m, k] = obj.position
            self.cat[m, k] = obj.category
            self.active[m, k] = True
        self.scores = None

    def theta(self, m: int) -> Theta:
        return Theta(self.lam[m], self.p[m])

    def theta_prev(self, m: int) -> Theta:
        return Theta(self.lam_prev[m], self.p_prev[m])

    def belief(self, m: int, previous: bool = False) -> MetaBeliefs:
        src = self.prev_beliefs if previous else self.beliefs
        return MetaBeliefs(*(b[m] for b in src))


def sample_prior_worlds(ps: ParticleSet, prior: ScenePrior, rng: np.random.Generator):
    """Replace every particle's world by a draw from the scene prior (repulsion ignored)."""
    n = rng.geometric(prior.count_p, size=ps.M) - 1
    K = max(ps.K, int(n.max()) + 1)
    ps.pos = np.zeros((ps.M, K, 3))
    ps.cat = np.zeros((ps.M, K), dtype=int)
    ps.active = np.arange(K)[None, :] < n[:, None]
    ps.pos[:] = rng.uniform(prior.bounds.low, prior.bounds.high, size=(ps.M, K, 3))
    ps.cat[:] = rng.integers(0, prior.n_categories, size=(ps.M, K))
    ps.scores = None


def sample_theta_arrays(beliefs, rng: np.random.Generator):
    ga, gb, ba, bb = beliefs
    lam = rng.gamma(ga, 1.0 / gb)
    p = np.minimum(rng.beta(ba, bb), _P_MAX)
    return lam, p


def _categorical_rows(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One categorical draw per row of non-negative ``weights``; rows summing to 0 give 0."""
    cum = np.cumsum(weights, axis=1)
    total = cum[:, -1:]
    u = rng.random((weights.shape[0], 1)) * total
    idx = np.sum(cum <= u, axis=1)
    return np.minimum(idx, weights.shape[1] - 1)


def _first_free(active: np.ndarray) -> np.ndarray:
    return np.argmin(active, axis=1)


@dataclass
class MoveStats:
    proposed: int = 0
    accepted: int = 0

    def add(self, proposed, accepted):
        self.proposed += int(np.sum(proposed))
        self.accepted += int(np.sum(accepted))

    @property
    def rate(self) -> float:
        return self.accepted / self.proposed if self.proposed else float("nan")


def world_edit_move(ps: ParticleSet, cache: SceneCache, rng: np.random.Generator, p_add_tail: str, stats: MoveStats):
    """Birth/death move over objects with data-driven births and match-weighted deaths."""
    ps.ensure_free_slot()
    M, K = ps.M, ps.K
    s = ps.scores
    padd = p_add_array(ps.lam.sum(1), cache.k_total, p_add_tail)
    is_add = rng.random(M) < padd

    qcat = category_weights(cache.counts, ps.lam, ps.p)
    qsum = qcat.sum(1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        qcat = qcat / qsum
    c_new = _categorical_rows(np.nan_to_num(qcat), rng)
    x_new = cache.sample_locations(c_new, rng)

    n_obj = ps.active.sum(1)
    w_rem = np.where(ps.active, 1.0 / (1.0 + s.obj_matches), 0.0)
    k_rem = _categorical_rows(w_rem, rng)
    log_u = np.log(rng.random(M))

    slot = _first_free(ps.active)
    rows = np.arange(M)
    pos = ps.pos.copy()
    cat = ps.cat.copy()
    active = ps.active.copy()
    add_rows = rows[is_add]
    pos[add_rows, slot[is_add]] = x_new[is_add]
    cat[add_rows, slot[is_add]] = c_new[is_add]
    active[add_rows, slot[is_add]] = True
    rem = ~is_add & (n_obj > 0)
    active[rows[rem], k_rem[rem]] = False
    valid = (is_add & (qsum[:, 0] > 0)) | rem
    if not np.any(valid):
        return

    new_s = score_worlds(cache, pos, cat, active)
    new_prior = world_log_prior_arrays(cache.prior, pos, cat, active)
    old_ll = s.base + theta_loglik(s, cache.T, ps.lam, ps.p)
    new_ll = new_s.base + theta_loglik(new_s, cache.T, ps.lam, ps.p)

    with np.errstate(divide="ignore", invalid="ignore"):
        log_padd = np.log(padd)
        log_pdel = np.log1p(-padd)
        # birth: reverse death picks the new slot with match-weighted probability
        w_new = np.where(active, 1.0 / (1.0 + new_s.obj_matches), 0.0)
        log_qrem_new = np.log(w_new[rows, slot]) - np.log(w_new.sum(1))
        log_qadd_new = np.log(qcat[rows, c_new]) + cache.log_location_density(x_new, c_new)
        birth = np.log(n_obj + 1.0) + log_pdel + log_qrem_new - log_padd - log_qadd_new
        # death: reverse birth must regenerate the removed object
        c_old = ps.cat[rows, k_rem]
        x_old = ps.pos[rows, k_rem]
        log_qadd_old = np.log(qcat[rows, c_old]) + cache.log_location_density(x_old, c_old)
        log_qrem_old = np.log(w_rem[rows, k_rem]) - np.log(w_rem.sum(1))
        death = log_padd + log_qadd_old - np.log(np.maximum(n_obj, 1)) - log_pdel - log_qrem_old
        log_alpha = (new_ll + new_prior) - (old_ll + ps.log_prior) + np.where(is_add, birth, death)
    accept = valid & (log_u < np.nan_to_num(log_alpha, nan=-np.inf))
    stats.add(valid, accept)
    _commit(ps, accept, pos, cat, active, new_s, new_prior)


def location_move(
    ps: ParticleSet, cache: SceneCache, rng: np.random.Generator, step_sigma: float, stats: MoveStats
):
    """Relocate one uniformly chosen object: Gaussian jitter or a redraw near a detection ray."""
    M = ps.M
    rows = np.arange(M)
    has = ps.active.any(1)
    k = _categorical_rows(ps.active.astype(float), rng)
    c = ps.cat[rows, k]
    x = ps.pos[rows, k]
    jitter = x + rng.normal(0.0, step_sigma, size=(M, 3))
    has_ray = cache.cand_count[c] > 0 if cache.J else np.zeros(M, dtype=bool)
    use_ray = (rng.random(M) < 0.5) & has_ray
    x_new = np.where(use_ray[:, None], _ray_only(cache, c, rng), jitter)
    log_u = np.log(rng.random(M))

    pos = ps.pos.copy()
    pos[rows, k] = np.where(has[:, None], x_new, x)
    new_s = score_worlds(cache, pos, ps.cat, ps.active)
    new_prior = world_log_prior_arrays(cache.prior, pos, ps.cat, ps.active)
    s = ps.scores
    old_ll = s.base + theta_loglik(s, cache.T, ps.lam, ps.p)
    new_ll = new_s.base + theta_loglik(new_s, cache.T, ps.lam, ps.p)

    log_gauss_norm = -1.5 * math.log(2 * math.pi * step_sigma**2)
    log_gauss = log_gauss_norm - np.sum((x_new - x) ** 2, axis=1) / (2 * step_sigma**2)
    with np.errstate(divide="ignore", invalid="ignore"):
        fwd = np.where(
            has_ray,
            math.log(0.5) + np.logaddexp(log_gauss, cache.log_ray_density(x_new, c)),
            log_gauss,
        )
        rev = np.where(
            has_ray,
            math.log(0.5) + np.logaddexp(log_gauss, cache.log_ray_density(x, c)),
            log_gauss,
        )
        log_alpha = (new_ll + new_prior) - (old_ll + ps.log_prior) + rev - fwd
    accept = has & (log_u < np.nan_to_num(log_alpha, nan=-np.inf))
    stats.add(has, accept)
    _commit(ps, accept, pos, ps.cat, ps.active, new_s, new_prior)


def _ray_only(cache: SceneCache, cats: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    M = cats.size
    if cache.J == 0:
        return np.zeros((M, 3))
    n = cache.cand_count[cats]
    pick = rng.random(M)
    j = cache.cand_idx[cats, np.minimum((pick * n).astype(int), np.maximum(n - 1, 0))]
    return sample_near_ray(cache.ray_origin[j], cache.ray_dir[j], cache.ray_t0[j], cache.ray_t1[j], cache.ray_sigma, rng)


def theta_move(ps: ParticleSet, cache: SceneCache, rng: np.random.Generator, stats: MoveStats):
    """Independence MH on every rate, proposing from the particle's current beliefs.

    Proposal equals the prior, so acceptance is the likelihood ratio.  The
    likelihood factorises over rates given the world, so each element is
    accepted or rejected on its own.  The previous-scene rates are redrawn
    from the previous beliefs; nothing in the current scene constrains them.
    """
    lam_new, p_new = sample_theta_arrays(ps.beliefs, rng)
    lam_prev, p_prev = sample_theta_arrays(ps.prev_beliefs, rng)
    log_u = np.log(rng.random((ps.M, 2, ps.C)))
    s = ps.scores
    old = theta_terms(s, cache.T, ps.lam, ps.p)
    new = theta_terms(s, cache.T, lam_new, p_new)
    accept = log_u < np.nan_to_num(new - old, nan=-np.inf)
    stats.add(np.ones_like(accept), accept)
    ps.lam = np.where(accept[:, 0], lam_new, ps.lam)
    ps.p = np.where(accept[:, 1], p_new, ps.p)
    ps.lam_prev, ps.p_prev = lam_prev, p_prev


def _commit(ps: ParticleSet, accept, pos, cat, active, new_s: Scores, new_prior):
    if not np.any(accept):
        return
    a = accept
    ps.pos[a] = pos[a]
    ps.cat[a] = cat[a]
    ps.active[a] = active[a]
    s = ps.scores
    for name in ("base", "halluc", "matched", "events", "obj_matches"):
        getattr(s, name)[a] = getattr(new_s, name)[a]
    ps.log_prior[a] = new_prior[a]


def effective_sample_size(log_w: np.ndarray) -> float:
    w = normalized_weights(log_w)
    return float(1.0 / np.sum(w**2))


def normalized_weights(log_w: np.ndarray) -> np.ndarray:
    log_w = np.asarray(log_w, dtype=float)
    mx = np.max(log_w)
    if not np.isfinite(mx):
        raise ValueError("degenerate ensemble: every particle weight is zero")
    w = np.exp(log_w - mx)
    return w / w.sum()


def systematic_resample(weights: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    M = weights.size
    positions = (rng.random() + np.arange(M)) / M
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    return np.searchsorted(cum, positions, side="right")
