"""Metrics for rates, world states and per-frame 2-d accuracy."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.stats import linregress

from .core import FrameObservation, SceneData, Theta, WorldState, diff_world_detections
from .geometry import CameraIntrinsics, project_many, pose_arrays
from .lightweight import LwFrame, LwTheta, LwWorldState


def _error_pair(theta) -> tuple[np.ndarray, np.ndarray]:
    """(hallucination, miss) arrays of either rate representation."""
    if isinstance(theta, LwTheta):
        return theta.hallucination, theta.miss
    if isinstance(theta, Theta):
        return theta.hallucination, theta.miss
    arr = np.asarray(theta, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != 2:
        raise TypeError("expected LwTheta, Theta or a (2, C) array of hallucination and miss rates")
    return arr[0], arr[1]


def theta_mse(theta_hat, theta_true) -> float:
    """``sum((H - H_hat)**2 + (M - M_hat)**2) / (2 |C|)``; full-model rates use miss = 1 - p."""
    h1, m1 = _error_pair(theta_hat)
    h2, m2 = _error_pair(theta_true)
    if h1.shape != h2.shape:
        raise ValueError(f"category counts differ: {h1.size} vs {h2.size}")
    return float((np.sum((h1 - h2) ** 2) + np.sum((m1 - m2) ** 2)) / (2 * h1.size))


def jaccard(inferred: Iterable, truth: Iterable) -> float:
    """Multiset Jaccard similarity; two empty collections agree perfectly."""
    a, b = Counter(inferred), Counter(truth)
    union = sum((a | b).values())
    if union == 0:
        return 1.0
    return sum((a & b).values()) / union


def _lw_bits(x):
    if isinstance(x, LwWorldState):
        return x.presence
    if isinstance(x, LwFrame):
        return x.detected
    return np.asarray(x, dtype=bool)


def lw_accuracy(inferred, truth) -> float:
    return jaccard(np.flatnonzero(_lw_bits(inferred)), np.flatnonzero(_lw_bits(truth)))


def faultiness(frames, world) -> float:
    """Mean per-bit disagreement between detections and the true presence vector."""
    if isinstance(frames, np.ndarray):
        arr = frames.astype(bool)
    else:
        arr = np.array([_lw_bits(f) for f in frames], dtype=bool)
    if arr.size == 0 or arr.ndim != 2:
        raise ValueError("faultiness needs at least one frame")
    w = _lw_bits(world)
    if w.shape[0] != arr.shape[1]:
        raise ValueError("frames and world disagree on the number of categories")
    return float(np.mean(arr != w[None, :]))


def detector_faultiness(blocks: Sequence[np.ndarray], worlds: Sequence) -> float:
    """Faultiness pooled over all frames of a detector."""
    flips = sum(int(np.sum(np.asarray(b, bool) != _lw_bits(w)[None])) for b, w in zip(blocks, worlds))
    bits = sum(np.asarray(b).size for b in blocks)
    return flips / bits


@dataclass(frozen=True)
class EmpiricalRates:
    """Rates measured against ground truth; ``miss`` is NaN for never-seen categories."""

    hallucination: np.ndarray
    miss: np.ndarray
    in_view: np.ndarray
    n_frames: int

    @property
    def detection(self) -> np.ndarray:
        return 1.0 - self.miss


def ground_truth_theta(
    scenes: Sequence[SceneData],
    n_categories: int,
    intr: CameraIntrinsics = CameraIntrinsics(),
    radius: float = 200.0,
) -> EmpiricalRates:
    """Hallucinations per frame and misses per in-view event, measured against ground truth."""
    halluc = np.zeros(n_categories)
    misses = np.zeros(n_categories)
    in_view = np.zeros(n_categories)
    n_frames = 0
    for scene in scenes:
        if scene.ground_truth is None:
            raise ValueError("ground_truth_theta needs scenes with ground truth")
        for frame in scene.frames:
            diff = diff_world_detections(scene.ground_truth, frame, radius, intr, n_categories)
            halluc += diff.hallucinations
            for e in diff.events:
                in_view[e.category] += 1
                misses[e.category] += e.matches == 0
            n_frames += 1
    if n_frames == 0:
        raise ValueError("ground_truth_theta needs at least one frame")
    with np.errstate(invalid="ignore", divide="ignore"):
        miss = np.where(in_view > 0, misses / in_view, np.nan)
    return EmpiricalRates(halluc / n_frames, miss, in_view.astype(int), n_frames)


# -- 2-d accuracy ------------------------------------------------------------------


@dataclass(frozen=True)
class GroundTruthBox:
    x: float
    y: float
    half_width: float
    half_height: float
    category: int

    def __post_init__(self):
        if self.half_width <= 0 or self.half_height <= 0:
            raise ValueError("box half extents must be positive")

    def contains(self, x, y) -> bool:
        return abs(x - self.x) <= self.half_width and abs(y - self.y) <= self.half_height


def frame_accuracy_2d(points: Sequence[tuple[int, float, float]], boxes: Sequence[GroundTruthBox]) -> float:
    """Per-category Hungarian matching of points to box centres.

    A matched pair counts as correct when the point lies inside the box.
    Score = correct pairs / (pairs + unmatched points + unmatched boxes);
    a frame with neither points nor boxes scores 1.
    """
    correct = pairs = unmatched = 0
    cats = {int(p[0]) for p in points} | {b.category for b in boxes}
    for c in cats:
        pts = np.array([(p[1], p[2]) for p in points if int(p[0]) == c], dtype=float).reshape(-1, 2)
        bxs = [b for b in boxes if b.category == c]
        centres = np.array([(b.x, b.y) for b in bxs], dtype=float).reshape(-1, 2)
        if len(pts) and len(bxs):
            cost = np.linalg.norm(pts[:, None, :] - centres[None, :, :], axis=-1)
            rows, cols = linear_sum_assignment(cost)
            pairs += len(rows)
            correct += sum(bxs[j].contains(*pts[i]) for i, j in zip(rows, cols))
        unmatched += abs(len(pts) - len(bxs))
    total = pairs + unmatched
    return 1.0 if total == 0 else correct / total


def video_accuracy_2d(points_per_frame, boxes_per_frame) -> float:
    if len(points_per_frame) != len(boxes_per_frame):
        raise ValueError("inferred points and truth boxes cover different numbers of frames")
    if not points_per_frame:
        return 1.0
    return float(np.mean([frame_accuracy_2d(p, b) for p, b in zip(points_per_frame, boxes_per_frame)]))


def accuracy_2d(videos_points, videos_boxes) -> float:
    """Mean over videos of the mean per-frame accuracy."""
    scores = [video_accuracy_2d(p, b) for p, b in zip(videos_points, videos_boxes, strict=True)]
    return float(np.mean(scores)) if scores else float("nan")


def world_points_2d(world: WorldState, frames: Sequence[FrameObservation], intr: CameraIntrinsics):
    """Project a world into every frame as ``(category, x, y)`` points of visible objects."""
    if len(world) == 0:
        return [[] for _ in frames]
    px, vis = project_many(world.positions(), pose_arrays([f.camera for f in frames]), intr)
    cats = world.categories()
    return [
        [(cats[k], float(px[k, t, 0]), float(px[k, t, 1])) for k in range(len(world)) if vis[k, t]]
        for t in range(len(frames))
    ]


def detection_points_2d(frames: Sequence[FrameObservation]):
    return [[(d.category, d.x, d.y) for d in f.detections] for f in frames]


def truth_boxes(scene: SceneData, intr: CameraIntrinsics, half_width: float = 100.0, half_height: float | None = None):
    """Synthetic ground-truth boxes centred on the projections of the true objects."""
    hh = half_width if half_height is None else half_height
    pts = world_points_2d(scene.ground_truth, scene.frames, intr)
    return [[GroundTruthBox(x, y, half_width, hh, c) for c, x, y in frame] for frame in pts]


def accuracy_3d(inferred: WorldState, truth: WorldState) -> tuple[float, float | None]:
    """Category Jaccard and the mean distance of same-category Hungarian pairs (None without pairs)."""
    jac = jaccard(inferred.categories(), truth.categories())
    dists = []
    ip, tp = inferred.positions(), truth.positions()
    icat, tcat = np.array(inferred.categories()), np.array(truth.categories())
    for c in set(icat.tolist()) & set(tcat.tolist()):
        a, b = ip[icat == c], tp[tcat == c]
        cost = np.linalg.norm(a[:, None] - b[None], axis=-1)
        r, k = linear_sum_assignment(cost)
        dists.extend(cost[r, k].tolist())
    return jac, (float(np.mean(dists)) if dists else None)


# -- curves and statistics -------------------------------------------------------


@dataclass(frozen=True)
class AccuracyCurve:
    x: np.ndarray
    y: np.ndarray
    n: np.ndarray
    half_width: float


def rolling_accuracy_curve(x, y, half_width: float = 0.05, grid=None) -> AccuracyCurve:
    """Mean of ``y`` over samples with ``|x - q| <= half_width`` at each grid point ``q``.

    The default grid runs from 0 to 0.5 in steps of 0.01.  Grid points with
    an empty window are dropped.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size == 0 or x.shape != y.shape:
        raise ValueError("need matching, non-empty x and y")
    grid = np.round(np.arange(0.0, 0.5 + 1e-9, 0.01), 10) if grid is None else np.asarray(grid, dtype=float)
    # a hair of slack so that window edges on the 0.01 grid are inclusive
    inside = np.abs(x[None, :] - grid[:, None]) <= half_width + 1e-9
    n = inside.sum(1)
    keep = n > 0
    sums = inside.astype(float) @ y
    return AccuracyCurve(grid[keep], sums[keep] / n[keep], n[keep], half_width)


def paired_bootstrap_ci(a, b, n_boot: int = 10_000, level: float = 0.95, seed: int = 0):
    """Mean of ``a - b`` and its percentile bootstrap interval over paired units."""
    diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    if diff.size == 0:
        raise ValueError("need at least one pair")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, diff.size, size=(n_boot, diff.size))
    means = diff[idx].mean(1)
    tail = (1 - level) / 2
    lo, hi = np.quantile(means, [tail, 1 - tail])
    return float(diff.mean()), float(lo), float(hi)


def regress(x, y):
    """Ordinary least squares of ``y`` on ``x``; returns scipy's LinregressResult."""
    return linregress(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
