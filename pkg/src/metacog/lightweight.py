"""Spatial-free variant: presence vectors, Bernoulli hallucinations and misses.

A detector is a pair of per-category probabilities: ``H_c`` of reporting an
absent category and ``M_c`` of missing a present one.  The filter keeps the
rates fixed across world states (identity dynamics) and rejuvenates them by
truncated-normal Metropolis-Hastings against a Beta prior.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import betaln, gammaln, logsumexp, ndtr, ndtri, xlog1py, xlogy

from .inference.engine import effective_sample_size, normalized_weights, systematic_resample


def _prob_array(values, name) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-d array")
    if not np.all((arr >= 0) & (arr <= 1)):
        raise ValueError(f"{name} entries must lie in [0, 1]")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LwTheta:
    hallucination: np.ndarray
    miss: np.ndarray

    def __post_init__(self):
        h = _prob_array(self.hallucination, "hallucination")
        m = _prob_array(self.miss, "miss")
        if h.shape != m.shape:
            raise ValueError("hallucination and miss vectors differ in length")
        object.__setattr__(self, "hallucination", h)
        object.__setattr__(self, "miss", m)

    @property
    def n_categories(self) -> int:
        return self.hallucination.size

    def as_array(self) -> np.ndarray:
        return np.stack([self.hallucination, self.miss])

    def __eq__(self, other):
        return (
            isinstance(other, LwTheta)
            and np.array_equal(self.hallucination, other.hallucination)
            and np.array_equal(self.miss, other.miss)
        )

    def __repr__(self):
        return f"LwTheta(hallucination={self.hallucination.tolist()}, miss={self.miss.tolist()})"


def _bits(values, name) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-d vector")
    if arr.dtype != bool:
        if not np.all(np.isin(arr, (0, 1))):
            raise ValueError(f"{name} entries must be 0/1")
        arr = arr.astype(bool)
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class LwWorldState:
    presence: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "presence", _bits(self.presence, "presence"))

    def __eq__(self, other):
        return isinstance(other, LwWorldState) and np.array_equal(self.presence, other.presence)

    def __hash__(self):
        return hash(self.presence.tobytes())

    def categories(self) -> list[int]:
        return np.flatnonzero(self.presence).tolist()

    def __repr__(self):
        return f"LwWorldState({self.presence.astype(int).tolist()})"


@dataclass(frozen=True, eq=False)
class LwFrame:
    detected: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "detected", _bits(self.detected, "detected"))

    def __eq__(self, other):
        return isinstance(other, LwFrame) and np.array_equal(self.detected, other.detected)

    def __repr__(self):
        return f"LwFrame({self.detected.astype(int).tolist()})"


@dataclass(frozen=True)
class LwDetectorData:
    """One detector's observations: a block of frames for each world state.

    ``frames[t]`` is a boolean array of shape (n_frames_t, C).  Ground truth
    (``worlds`` and ``theta``) is optional and only used for evaluation.
    """

    frames: tuple[np.ndarray, ...]
    worlds: tuple[LwWorldState, ...] | None = None
    theta: LwTheta | None = None
    detector_id: int = 0

    def __post_init__(self):
        blocks = []
        for i, f in enumerate(self.frames):
            if isinstance(f, (list, tuple)) and f and isinstance(f[0], LwFrame):
                f = np.stack([x.detected for x in f])
            arr = np.asarray(f, dtype=bool)
            if arr.ndim != 2 or arr.shape[0] == 0:
                raise ValueError(f"world {i} needs a non-empty (frames, categories) array")
            blocks.append(arr)
        if len({b.shape[1] for b in blocks}) > 1:
            raise ValueError("frames disagree on the number of categories")
        object.__setattr__(self, "frames", tuple(blocks))
        if self.worlds is not None:
            object.__setattr__(self, "worlds", tuple(self.worlds))
            if len(self.worlds) != len(blocks):
                raise ValueError("one ground-truth world is needed per frame block")

    @property
    def n_categories(self) -> int:
        return self.frames[0].shape[1]

    def __len__(self):
        return len(self.frames)


def lw_frame_log_likelihood(frame: LwFrame, world: LwWorldState, theta: LwTheta) -> float:
    d = np.asarray(frame.detected, dtype=bool)
    w = np.asarray(world.presence, dtype=bool)
    if not (d.shape == w.shape == theta.hallucination.shape):
        raise ValueError("frame, world and theta must cover the same categories")
    h, m = theta.hallucination, theta.miss
    with np.errstate(divide="ignore"):
        terms = np.where(w, np.where(d, np.log1p(-m), np.log(m)), np.where(d, np.log(h), np.log1p(-h)))
    return float(np.sum(terms))


@dataclass(frozen=True)
class LwConfig:
    num_particles: int = 100
    sweeps: int = 20
    proposal_var: float = 0.01
    prior_a: float = 2.0
    prior_b: float = 10.0
    ess_threshold: float = 0.5
    min_objects: int = 1
    max_objects: int = 5
    count_rate: float = 1.0
    # "prior": each particle draws its world from the world prior and is
    # weighted by the likelihood.  "enumerate": each particle draws its world
    # from the exact conditional posterior and is weighted by the marginal.
    world_proposal: str = "prior"
    # "marginal": incremental weights integrate the rates out against each
    # particle's conjugate Beta posterior.  "sample": weights use the
    # particle's sampled rates.  Both target the same posterior; "sample"
    # has far higher variance at a given particle count.
    weighting: str = "marginal"
    seed: int | None = 0

    def __post_init__(self):
        if int(self.num_particles) < 1:
            raise ValueError("num_particles must be at least 1")
        if int(self.sweeps) < 0:
            raise ValueError("sweeps must be non-negative")
        if self.proposal_var <= 0 or self.prior_a <= 0 or self.prior_b <= 0:
            raise ValueError("proposal variance and prior parameters must be positive")
        if not 0 <= self.min_objects <= self.max_objects:
            raise ValueError("need 0 <= min_objects <= max_objects")
        if self.world_proposal not in ("prior", "enumerate"):
            raise ValueError("world_proposal must be 'prior' or 'enumerate'")
        if self.weighting not in ("marginal", "sample"):
            raise ValueError("weighting must be 'marginal' or 'sample'")


def all_worlds(n_categories: int) -> np.ndarray:
    """Every presence vector, shape (2**C, C), in binary counting order."""
    return np.array(list(itertools.product((False, True), repeat=n_categories)), dtype=bool)


def truncated_poisson_pmf(rate: float, low: int, high: int) -> np.ndarray:
    """P(N=n) for n = 0..high under Poisson(rate) truncated to [low, high]."""
    n = np.arange(high + 1)
    logp = xlogy(n, rate) - rate - gammaln(n + 1)
    logp[:low] = -np.inf
    return np.exp(logp - logsumexp(logp))


def world_log_prior_table(n_categories: int, cfg: LwConfig) -> np.ndarray:
    """Log prior of each row of :func:`all_worlds`: truncated-Poisson count, uniform subset."""
    worlds = all_worlds(n_categories)
    n = worlds.sum(1)
    hi = min(cfg.max_objects, n_categories)
    pmf = truncated_poisson_pmf(cfg.count_rate, min(cfg.min_objects, hi), hi)
    log_comb = gammaln(n_categories + 1) - gammaln(n + 1) - gammaln(n_categories - n + 1)
    with np.errstate(divide="ignore"):
        return np.where(n <= hi, np.log(pmf[np.minimum(n, hi)]) - log_comb, -np.inf)


def _block_counts(block: np.ndarray) -> tuple[np.ndarray, int]:
    return block.sum(0).astype(float), block.shape[0]


def _world_loglik(h, m, worlds, d, F):
    """Log-likelihood of a frame block with per-category detection counts ``d`` out of ``F``.

    ``h``, ``m`` and ``worlds`` broadcast against each other; the last axis is the category.
    """
    present = xlog1py(d, -m) + xlogy(F - d, m)
    absent = xlogy(d, h) + xlog1py(F - d, -h)
    return np.sum(np.where(worlds, present, absent), axis=-1)


def _world_logmarg(stats, worlds, d, F, a, b):
    """Log-likelihood of a frame block with the rates integrated against their Beta posteriors.

    ``stats`` holds the per-category outcome counts of a particle's past
    worlds (see ``lw_run_filter``) and broadcasts against ``worlds``.
    """
    ad, an, pn, pd = (stats[..., k, :] for k in range(4))
    absent = betaln(a + ad + d, b + an + F - d) - betaln(a + ad, b + an)
    present = betaln(a + pn + F - d, b + pd + d) - betaln(a + pn, b + pd)
    return np.sum(np.where(worlds, present, absent), axis=-1)


def _log_beta_target(x, n1, n0, a, b):
    with np.errstate(divide="ignore", invalid="ignore"):
        return xlogy(a - 1 + n1, x) + xlog1py(b - 1 + n0, -x)


def truncnorm_step(x: np.ndarray, sigma: float, rng: np.random.Generator):
    """Truncated-normal proposal on (0, 1) centred at ``x``.

    Returns the proposal and ``log q(x | x') - log q(x' | x)``.
    """
    lo = ndtr(-x / sigma)
    hi = ndtr((1 - x) / sigma)
    u = rng.uniform(size=x.shape)
    x_new = x + sigma * ndtri(lo + u * (hi - lo))
    x_new = np.clip(x_new, 1e-12, 1 - 1e-12)
    z_fwd = hi - lo
    z_rev = ndtr((1 - x_new) / sigma) - ndtr(-x_new / sigma)
    # the Gaussian kernels cancel; only the truncation normalisers remain
    return x_new, np.log(z_fwd) - np.log(z_rev)


@dataclass
class LwFilterResult:
    worlds: list[LwWorldState]
    theta_hats: list[LwTheta]
    world_posteriors: np.ndarray = field(repr=False)  # (T, 2**C) estimated posterior mass
    ess: list[float] = field(default_factory=list)
    acceptance: float = float("nan")

    @property
    def final_theta(self) -> LwTheta:
        return self.theta_hats[-1]


class _LwFilter:
    def __init__(self, n_categories: int, cfg: LwConfig, rng: np.random.Generator):
        self.C = n_categories
        self.cfg = cfg
        self.rng = rng
        self.worlds = all_worlds(n_categories)
        self.log_prior = world_log_prior_table(n_categories, cfg)
        self.prior_p = np.exp(self.log_prior)
        self.prior_p /= self.prior_p.sum()
        self._weights = 1 << np.arange(n_categories)[::-1]

    def world_index(self, w):
        return np.asarray(w, dtype=int) @ self._weights

    def propose_worlds(self, M, loglik):
        """``loglik(worlds, expand)`` scores (M, C) worlds, or all worlds against every particle if ``expand``."""
        if self.cfg.world_proposal == "prior":
            idx = self.rng.choice(len(self.worlds), size=M, p=self.prior_p)
            ll = loglik(self.worlds[idx], False)
            post = np.zeros((M, len(self.worlds)))
            post[np.arange(M), idx] = 1.0
            return idx, ll, post
        joint = self.log_prior[None, :] + loglik(self.worlds[None], True)
        marg = logsumexp(joint, axis=1)
        post = np.exp(joint - marg[:, None])
        cum = np.cumsum(post, axis=1)
        u = self.rng.random((M, 1)) * cum[:, -1:]
        idx = np.minimum(np.sum(cum <= u, axis=1), len(self.worlds) - 1)
        return idx, marg, post


def _frame_blocks(data) -> tuple[np.ndarray, ...]:
    if isinstance(data, LwDetectorData):
        return data.frames
    return LwDetectorData(tuple(data)).frames


def lw_run_filter(data, cfg: LwConfig | None = None, rng: np.random.Generator | None = None) -> LwFilterResult:
    """Learn the rates while inferring each world state in turn.

    ``data`` is an :class:`LwDetectorData` or a sequence of per-world frame
    blocks.  Every particle holds a rate hypothesis plus the counts of
    (present, detected) and (absent, detected) outcomes implied by its past
    world hypotheses; these are sufficient for the rate posterior.
    """
    cfg = cfg or LwConfig()
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    blocks = _frame_blocks(data)
    C = blocks[0].shape[1]
    M = int(cfg.num_particles)
    flt = _LwFilter(C, cfg, rng)
    a, b = cfg.prior_a, cfg.prior_b
    theta = rng.beta(a, b, size=(M, 2, C))  # [:, 0] hallucination, [:, 1] miss
    # per particle and category: [absent & detected, absent & not, present & not, present & detected]
    stats = np.zeros((M, 4, C))
    log_w = np.zeros(M)
    sigma = math.sqrt(cfg.proposal_var)
    worlds, thetas, posts, ess_trace = [], [], [], []
    accepted = proposed = 0
    for block in blocks:
        d, F = _block_counts(block)
        if cfg.weighting == "marginal":
            def loglik(W, expand, stats=stats):
                return _world_logmarg(stats[:, None] if expand else stats, W, d, F, a, b)
        else:
            def loglik(W, expand, h=theta[:, 0], m=theta[:, 1]):
                return _world_loglik(h[:, None], m[:, None], W, d, F) if expand else _world_loglik(h, m, W, d, F)
        idx, ll, post = flt.propose_worlds(M, loglik)
        log_w = log_w + ll
        w = normalized_weights(log_w)
        world_post = w @ post
        posts.append(world_post)
        worlds.append(LwWorldState(flt.worlds[int(np.argmax(world_post))]))
        ess = effective_sample_size(log_w)
        ess_trace.append(ess)
        if ess < cfg.ess_threshold * M:
            keep = systematic_resample(w, rng)
            theta, stats, idx = theta[keep], stats[keep], idx[keep]
            log_w = np.zeros(M)
        present = flt.worlds[idx]
        stats += np.stack(
            [
                np.where(present, 0.0, d),
                np.where(present, 0.0, F - d),
                np.where(present, F - d, 0.0),
                np.where(present, d, 0.0),
            ],
            axis=1,
        )
        # the rate posterior factorises over elements, so updating all of
        # them together equals any sequential order
        n1 = np.stack([stats[:, 0], stats[:, 2]], axis=1)
        n0 = np.stack([stats[:, 1], stats[:, 3]], axis=1)
        cur = _log_beta_target(theta, n1, n0, a, b)
        for _ in range(cfg.sweeps):
            prop, log_q = truncnorm_step(theta, sigma, rng)
            new = _log_beta_target(prop, n1, n0, a, b)
            acc = np.log(rng.random(theta.shape)) < new - cur + log_q
            theta = np.where(acc, prop, theta)
            cur = np.where(acc, new, cur)
            accepted += int(acc.sum())
            proposed += acc.size
        w = normalized_weights(log_w)
        est = np.einsum("m,mjc->jc", w, theta)
        thetas.append(LwTheta(est[0], est[1]))
    return LwFilterResult(worlds, thetas, np.array(posts), ess_trace, accepted / proposed if proposed else float("nan"))


def lw_reinfer(data, theta_fixed: LwTheta, cfg: LwConfig | None = None, rng: np.random.Generator | None = None):
    """Infer every world state with the rates held at ``theta_fixed``."""
    cfg = cfg or LwConfig()
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    blocks = _frame_blocks(data)
    C = blocks[0].shape[1]
    if theta_fixed.n_categories != C:
        raise ValueError("theta and frames disagree on the number of categories")
    M = int(cfg.num_particles)
    flt = _LwFilter(C, cfg, rng)
    H = np.broadcast_to(theta_fixed.hallucination, (M, C))
    Mi = np.broadcast_to(theta_fixed.miss, (M, C))
    out = []
    for block in blocks:
        d, F = _block_counts(block)
        _, ll, post = flt.propose_worlds(
            M, lambda W, expand: _world_loglik(H[:, None], Mi[:, None], W, d, F) if expand else _world_loglik(H, Mi, W, d, F)
        )
        with np.errstate(invalid="ignore"):
            if not np.any(np.isfinite(ll)):
                # every proposed world is impossible under theta_fixed
                world_post = post.mean(0)
            else:
                world_post = normalized_weights(ll) @ post
        out.append(LwWorldState(flt.worlds[int(np.argmax(world_post))]))
    return out


def lw_exact_posterior(blocks: Sequence[np.ndarray], cfg: LwConfig | None = None, grid: int = 400) -> np.ndarray:
    """Exact world marginals of the last block, integrating the rates on a grid.

    Enumerates every sequence of world states, which is only feasible for
    few categories and blocks.  Rates are integrated on a midpoint grid per
    element, exploiting that the joint factorises over categories given the
    world sequence.  Returns a (2**C,) array of posterior probabilities.
    """
    cfg = cfg or LwConfig()
    blocks = [np.asarray(b, dtype=bool) for b in blocks]
    C = blocks[0].shape[1]
    worlds = all_worlds(C)
    log_prior = world_log_prior_table(C, cfg)
    x = (np.arange(grid) + 0.5) / grid
    log_beta_prior = xlogy(cfg.prior_a - 1, x) + xlog1py(cfg.prior_b - 1, -x)
    log_beta_prior -= logsumexp(log_beta_prior)
    counts = [_block_counts(b) for b in blocks]
    out = np.full(len(worlds), -np.inf)
    for seq in itertools.product(range(len(worlds)), repeat=len(blocks)):
        lp = sum(log_prior[s] for s in seq)
        if not np.isfinite(lp):
            continue
        total = lp
        for c in range(C):
            ad = an = pn = pd = 0.0
            for s, (d, F) in zip(seq, counts):
                if worlds[s, c]:
                    pd += d[c]
                    pn += F - d[c]
                else:
                    ad += d[c]
                    an += F - d[c]
            total += logsumexp(log_beta_prior + xlogy(ad, x) + xlog1py(an, -x))
            total += logsumexp(log_beta_prior + xlogy(pn, x) + xlog1py(pd, -x))
        out[seq[-1]] = np.logaddexp(out[seq[-1]], total)
    return np.exp(out - logsumexp(out))
