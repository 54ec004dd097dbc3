"""Domain types, meta-cognitive beliefs and the world/detection diff.

The detector's reliability is summarised per category by a hallucination
rate ``lambda_c`` (Poisson count of spurious detections per frame) and a
detection rate ``p_c`` (geometric count of detections of a visible object,
``P(N=n) = p_c**n * (1 - p_c)``, so the miss rate is ``1 - p_c``).  Beliefs
over those rates are conjugate Gamma / Beta pairs that get updated once per
scene from the diff between an inferred world and the observed detections.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import CameraIntrinsics, CameraPose, project


class CategoryTable:
    """Ordered, immutable list of category labels."""

    def __init__(self, names: Sequence[str]):
        names = tuple(str(n) for n in names)
        if len(names) == 0:
            raise ValueError("a category table needs at least one label")
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate category labels in {names!r}")
        self._names = names
        self._index = {n: i for i, n in enumerate(names)}

    @property
    def names(self) -> tuple[str, ...]:
        return self._names

    def __len__(self) -> int:
        return len(self._names)

    def __iter__(self):
        return iter(self._names)

    def __eq__(self, other) -> bool:
        return isinstance(other, CategoryTable) and other._names == self._names

    def __hash__(self) -> int:
        return hash(self._names)

    def __repr__(self) -> str:
        return f"CategoryTable({list(self._names)!r})"

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown category label {name!r}") from None

    def name(self, idx: int) -> str:
        return self._names[idx]


DEFAULT_CATEGORIES = CategoryTable(["potted plant", "chair", "bowl", "tv", "umbrella"])


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Theta:
    """Per-category hallucination rates and detection rates."""

    hallucination: np.ndarray
    detection: np.ndarray

    def __post_init__(self):
        lam = _frozen(self.hallucination)
        p = _frozen(self.detection)
        if lam.ndim != 1 or lam.shape != p.shape or lam.size == 0:
            raise ValueError("hallucination and detection rates must be 1-d of equal length")
        if not np.all(np.isfinite(lam)) or np.any(lam < 0):
            raise ValueError("hallucination rates must be finite and non-negative")
        if np.any(p < 0) or np.any(p >= 1):
            raise ValueError("detection rates must lie in [0, 1)")
        object.__setattr__(self, "hallucination", lam)
        object.__setattr__(self, "detection", p)

    @property
    def miss(self) -> np.ndarray:
        return 1.0 - self.detection

    @property
    def n_categories(self) -> int:
        return self.hallucination.size

    @classmethod
    def from_miss(cls, hallucination, miss) -> "Theta":
        return cls(hallucination, 1.0 - np.asarray(miss, dtype=float))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Theta)
            and np.array_equal(self.hallucination, other.hallucination)
            and np.array_equal(self.detection, other.detection)
        )

    def __repr__(self) -> str:
        return (
            f"Theta(hallucination={self.hallucination.tolist()}, "
            f"detection={self.detection.tolist()})"
        )


@dataclass(frozen=True, eq=False)
class MetaBeliefs:
    """Gamma(alpha, beta) over each hallucination rate, Beta(alpha, beta) over each detection rate.

    Gamma uses the rate parameterisation, so its mean is ``alpha / beta``.
    """

    gamma_alpha: np.ndarray
    gamma_beta: np.ndarray
    beta_alpha: np.ndarray
    beta_beta: np.ndarray

    def __post_init__(self):
        arrays = [_frozen(getattr(self, f)) for f in ("gamma_alpha", "gamma_beta", "beta_alpha", "beta_beta")]
        shape = arrays[0].shape
        if len(shape) != 1 or shape[0] == 0 or any(a.shape != shape for a in arrays):
            raise ValueError("belief parameter arrays must be 1-d with one entry per category")
        for a in arrays:
            if not np.all(np.isfinite(a)) or np.any(a <= 0):
                raise ValueError("belief parameters must be finite and strictly positive")
        for name, a in zip(("gamma_alpha", "gamma_beta", "beta_alpha", "beta_beta"), arrays):
            object.__setattr__(self, name, a)

    @property
    def n_categories(self) -> int:
        return self.gamma_alpha.size

    def __eq__(self, other) -> bool:
        return isinstance(other, MetaBeliefs) and all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("gamma_alpha", "gamma_beta", "beta_alpha", "beta_beta")
        )

    def __repr__(self) -> str:
        return (
            f"MetaBeliefs(gamma={list(zip(self.gamma_alpha.tolist(), self.gamma_beta.tolist()))}, "
            f"beta={list(zip(self.beta_alpha.tolist(), self.beta_beta.tolist()))})"
        )


@dataclass(frozen=True)
class Object3D:
    position: tuple[float, float, float]
    category: int

    def __post_init__(self):
        pos = tuple(float(v) for v in self.position)
        if len(pos) != 3 or not all(np.isfinite(pos)):
            raise ValueError(f"object position must be 3 finite numbers, got {self.position!r}")
        if int(self.category) < 0:
            raise ValueError("category index must be non-negative")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "category", int(self.category))


@dataclass(frozen=True)
class WorldState:
    objects: tuple[Object3D, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "objects", tuple(self.objects))

    def __len__(self) -> int:
        return len(self.objects)

    def categories(self) -> list[int]:
        return [o.category for o in self.objects]

    def positions(self) -> np.ndarray:
        if not self.objects:
            return np.zeros((0, 3))
        return np.array([o.position for o in self.objects], dtype=float)


@dataclass(frozen=True)
class Detection2D:
    x: float
    y: float
    category: int

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.y)):
            raise ValueError("detection coordinates must be finite")
        if int(self.category) < 0:
            raise ValueError("category index must be non-negative")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "category", int(self.category))


@dataclass(frozen=True)
class FrameObservation:
    camera: CameraPose
    detections: tuple[Detection2D, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "detections", tuple(self.detections))


@dataclass(frozen=True)
class SceneData:
    """Frames of one scene.  ``ground_truth`` is for evaluation only."""

    frames: tuple[FrameObservation, ...]
    ground_truth: WorldState | None = field(default=None, compare=False)

    def __post_init__(self):
        frames = tuple(self.frames)
        if len(frames) == 0:
            raise ValueError("a scene needs at least one frame")
        object.__setattr__(self, "frames", frames)

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    def n_detections(self) -> int:
        return sum(len(f.detections) for f in self.frames)

    def without_truth(self) -> "SceneData":
        return SceneData(self.frames)


@dataclass(frozen=True)
class InViewEvent:
    object_index: int
    category: int
    matches: int


@dataclass(frozen=True)
class DiffResult:
    """Outcome of matching one frame's detections against a world.

    ``match_distances`` holds the pixel displacement of every matched
    detection, in detection order; the likelihood needs them.
    """

    hallucinations: np.ndarray
    events: tuple[InViewEvent, ...]
    match_distances: tuple[float, ...] = ()
    n_detections: int = 0

    def matched_total(self) -> int:
        return sum(e.matches for e in self.events)

    def hallucination_total(self) -> int:
        return int(self.hallucinations.sum())


def prior_beliefs(categories: CategoryTable | int) -> MetaBeliefs:
    """Gamma(1, 1) and Beta(1, 1) for every category."""
    n = categories if isinstance(categories, int) else len(categories)
    if n < 1:
        raise ValueError("need at least one category")
    ones = np.ones(n)
    return MetaBeliefs(ones, ones, ones, ones)


def diff_world_detections(
    world: WorldState,
    frame: FrameObservation,
    radius: float,
    intrinsics: CameraIntrinsics,
    n_categories: int,
) -> DiffResult:
    """Attribute each detection in ``frame`` to an object of ``world`` or to hallucination.

    Every detection is matched to the nearest visible projected object of the
    same category if that object lies within ``radius`` pixels.  Objects may
    absorb several detections; a detection matches at most one object.  Ties
    go to the lower object index.
    """
    if radius <= 0:
        raise ValueError("matching radius must be positive")
    projected = []
    for idx, obj in enumerate(world.objects):
        if obj.category >= n_categories:
            raise ValueError(f"object category {obj.category} outside table of size {n_categories}")
        px = project(obj.position, frame.camera, intrinsics)
        if px is not None and _inside(px, intrinsics):
            projected.append((idx, obj.category, px))

    hallucinations = np.zeros(n_categories, dtype=int)
    matches = {idx: 0 for idx, _, _ in projected}
    distances = []
    for det in frame.detections:
        if det.category >= n_categories:
            raise ValueError(f"detection category {det.category} outside table of size {n_categories}")
        best, best_d = None, np.inf
        for idx, cat, (x, y) in projected:
            if cat != det.category:
                continue
            d = float(np.hypot(det.x - x, det.y - y))
            if d < best_d:
                best, best_d = idx, d
        if best is not None and best_d <= radius:
            matches[best] += 1
            distances.append(best_d)
        else:
            hallucinations[det.category] += 1

    events = tuple(InViewEvent(idx, cat, matches[idx]) for idx, cat, _ in projected)
    return DiffResult(hallucinations, events, tuple(distances), len(frame.detections))


def _inside(px, intr: CameraIntrinsics) -> bool:
    return 0.0 <= px[0] <= intr.width and 0.0 <= px[1] <= intr.height


def update_beliefs(beliefs: MetaBeliefs, diffs: Sequence[DiffResult], num_frames: int) -> MetaBeliefs:
    """Conjugate update from one scene's diffs.

    Gamma: ``alpha += hallucinations``, ``beta += num_frames``.
    Beta: ``alpha += matched detections``, ``beta += in-view events``.
    """
    if num_frames <= 0:
        raise ValueError("num_frames must be positive")
    n = beliefs.n_categories
    halluc = np.zeros(n)
    matched = np.zeros(n)
    events = np.zeros(n)
    for diff in diffs:
        halluc += diff.hallucinations
        for e in diff.events:
            matched[e.category] += e.matches
            events[e.category] += 1
    return MetaBeliefs(
        beliefs.gamma_alpha + halluc,
        beliefs.gamma_beta + num_frames,
        beliefs.beta_alpha + matched,
        beliefs.beta_beta + events,
    )


# Beta draws can round to exactly 1.0 for extreme parameters; Theta forbids p == 1.
_P_MAX = 1.0 - 1e-12


def sample_theta(beliefs: MetaBeliefs, rng: np.random.Generator) -> Theta:
    lam = rng.gamma(beliefs.gamma_alpha, 1.0 / beliefs.gamma_beta)
    p = rng.beta(beliefs.beta_alpha, beliefs.beta_beta)
    return Theta(lam, np.minimum(p, _P_MAX))


def expected_theta(beliefs: MetaBeliefs) -> Theta:
    return Theta(
        beliefs.gamma_alpha / beliefs.gamma_beta,
        beliefs.beta_alpha / (beliefs.beta_alpha + beliefs.beta_beta),
    )
