"""End-to-end experiment drivers shared by the command line and the test-suite."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .core import SceneData, Theta, WorldState, expected_theta, prior_beliefs
from .evaluation import (
    accuracy_3d,
    detection_points_2d,
    faultiness,
    lw_accuracy,
    theta_mse,
    truth_boxes,
    video_accuracy_2d,
    world_points_2d,
)
from .generative import NoiseModel
from .geometry import CameraIntrinsics
from .inference import FilterConfig, reinfer, run_filter
from .lightweight import LwConfig, LwDetectorData, LwTheta, lw_reinfer, lw_run_filter
from .simulator import item_rng


def worker_count() -> int:
    """Worker processes to use: ``METACOG_THREADS`` if set, else the usable CPUs."""
    env = os.environ.get("METACOG_THREADS")
    if env:
        n = int(env)
        if n < 1:
            raise ValueError("METACOG_THREADS must be a positive integer")
        return n
    try:
        return len(os.sched_getaffinity(0))
    except AttributeError:  # pragma: no cover - non-Linux
        return os.cpu_count() or 1


def _map(fn, items, workers: int):
    """Ordered map; results never depend on ``workers``."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items, chunksize=max(1, len(items) // (4 * workers))))


# -- lightweight ------------------------------------------------------------------


@dataclass
class LwDetectorResult:
    detector_id: int
    theta_true: LwTheta
    theta_hats: np.ndarray  # (T, 2, C)
    mse: np.ndarray  # (T,)
    acc_learning: np.ndarray  # (T,)
    acc_metacog: np.ndarray  # (T,)
    acc_lesioned: np.ndarray  # (T,)
    world_faultiness: np.ndarray  # (T,)

    @property
    def faultiness(self) -> float:
        return float(np.mean(self.world_faultiness))


def lesioned_lw_theta(n_categories: int, cfg: LwConfig = LwConfig()) -> LwTheta:
    mean = cfg.prior_a / (cfg.prior_a + cfg.prior_b)
    return LwTheta(np.full(n_categories, mean), np.full(n_categories, mean))


def run_lw_detector(data: LwDetectorData, cfg: LwConfig = LwConfig(), seed: int = 0) -> LwDetectorResult:
    """Learning run, then re-inference with the learned and with the lesioned rates.

    The three runs use independent streams derived from ``(seed, detector_id)``.
    """
    base = np.random.SeedSequence(seed, spawn_key=(data.detector_id,))
    streams = [np.random.default_rng(s) for s in base.spawn(3)]
    res = lw_run_filter(data, cfg, streams[0])
    truth = data.worlds
    les = lesioned_lw_theta(data.n_categories, cfg)
    w_meta = lw_reinfer(data, res.final_theta, cfg, streams[1])
    w_les = lw_reinfer(data, les, cfg, streams[2])
    return LwDetectorResult(
        data.detector_id,
        data.theta,
        np.array([t.as_array() for t in res.theta_hats]),
        np.array([theta_mse(t, data.theta) for t in res.theta_hats]),
        np.array([lw_accuracy(w, g) for w, g in zip(res.worlds, truth)]),
        np.array([lw_accuracy(w, g) for w, g in zip(w_meta, truth)]),
        np.array([lw_accuracy(w, g) for w, g in zip(w_les, truth)]),
        np.array([faultiness(b, g) for b, g in zip(data.frames, truth)]),
    )


def _lw_job(args):
    return run_lw_detector(*args)


def run_lw_experiment(
    dataset: Sequence[LwDetectorData], cfg: LwConfig = LwConfig(), seed: int = 0, workers: int | None = None
) -> list[LwDetectorResult]:
    workers = worker_count() if workers is None else workers
    return _map(_lw_job, [(d, cfg, seed) for d in dataset], workers)


# -- full model ---------------------------------------------------------------------


@dataclass
class ClosedLoopResult:
    theta_hats: list[Theta]
    mse: np.ndarray  # after each training scene
    prior_mse: float
    acc2d: dict[str, np.ndarray]  # per scene, keyed by model
    jaccard: dict[str, np.ndarray]
    distance: dict[str, list]
    worlds: dict[str, list[WorldState]] = field(repr=False, default_factory=dict)
    diagnostics: list = field(repr=False, default_factory=list)


def score_worlds_2d(scenes: Sequence[SceneData], worlds: Sequence[WorldState], intr, half_width=100.0) -> np.ndarray:
    return np.array(
        [
            video_accuracy_2d(world_points_2d(w, s.frames, intr), truth_boxes(s, intr, half_width))
            for s, w in zip(scenes, worlds)
        ]
    )


def score_detections_2d(scenes: Sequence[SceneData], intr, half_width=100.0) -> np.ndarray:
    return np.array(
        [video_accuracy_2d(detection_points_2d(s.frames), truth_boxes(s, intr, half_width)) for s in scenes]
    )


def run_closed_loop(
    train: Sequence[SceneData],
    test: Sequence[SceneData] = (),
    theta_true: Theta | None = None,
    cfg: FilterConfig = FilterConfig(),
    intr: CameraIntrinsics = CameraIntrinsics(),
    noise: NoiseModel = NoiseModel(),
    n_categories: int = 5,
    half_width: float = 100.0,
) -> ClosedLoopResult:
    """Learn on ``train``, then re-infer ``train + test`` with the learned and lesioned rates.

    Inference only ever sees detections; ground truth is used for scoring.
    """
    blind = [s.without_truth() for s in train]
    res = run_filter(blind, cfg, intr, noise, n_categories=n_categories)
    eval_scenes = list(train) + list(test)
    lesioned = expected_theta(prior_beliefs(n_categories))
    worlds = {
        "metacog": reinfer([s.without_truth() for s in eval_scenes], res.final_theta, replace(cfg, seed=_child(cfg.seed, 1)), intr, noise),
        "lesioned": reinfer([s.without_truth() for s in eval_scenes], lesioned, replace(cfg, seed=_child(cfg.seed, 2)), intr, noise),
        "learning": list(res.worlds),
    }
    acc = {k: score_worlds_2d(eval_scenes[: len(v)], v, intr, half_width) for k, v in worlds.items()}
    acc["detections"] = score_detections_2d(eval_scenes, intr, half_width)
    jac, dist = {}, {}
    for k, v in worlds.items():
        pairs = [accuracy_3d(w, s.ground_truth) for w, s in zip(v, eval_scenes)]
        jac[k] = np.array([p[0] for p in pairs])
        dist[k] = [p[1] for p in pairs]
    mse = np.array([theta_mse(t, theta_true) for t in res.theta_hats]) if theta_true is not None else np.array([])
    prior_mse = theta_mse(lesioned, theta_true) if theta_true is not None else float("nan")
    return ClosedLoopResult(res.theta_hats, mse, prior_mse, acc, jac, dist, worlds, res.diagnostics)


def _child(seed, k):
    return int(np.random.SeedSequence(seed, spawn_key=(k,)).generate_state(1)[0])


def counterbalanced_orders(n: int, seed: int, k: int = 4) -> list[np.ndarray]:
    """``k`` scene orders: a random permutation, its reverse, and two rotations of both."""
    perm = item_rng(seed, 10_000).permutation(n)
    orders = [perm, perm[::-1], np.roll(perm, n // 2), np.roll(perm[::-1], n // 2)]
    return orders[:k]
