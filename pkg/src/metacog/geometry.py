"""Pinhole cameras, rays and camera-trajectory sampling.

Scene coordinates are right-handed with +y up; the floor is y = 0.  Image
coordinates have their origin at the top-left corner with y growing down.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

_UP = np.array([0.0, 1.0, 0.0])


@dataclass(frozen=True)
class CameraIntrinsics:
    width: int = 800
    height: int = 800
    vertical_fov: float = 60.0

    def __post_init__(self):
        if int(self.width) < 1 or int(self.height) < 1:
            raise ValueError("image width and height must be at least 1 pixel")
        if not (0.0 < float(self.vertical_fov) < 180.0):
            raise ValueError("vertical_fov must lie in (0, 180) degrees")

    @property
    def focal_px(self) -> float:
        """Focal length in pixels (square pixels)."""
        return (self.height / 2.0) / math.tan(math.radians(self.vertical_fov) / 2.0)

    @property
    def center(self) -> tuple[float, float]:
        return self.width / 2.0, self.height / 2.0

    @property
    def area(self) -> float:
        return float(self.width * self.height)


@dataclass(frozen=True)
class CameraPose:
    position: tuple[float, float, float]
    focal_point: tuple[float, float, float]

    def __post_init__(self):
        pos = tuple(float(v) for v in self.position)
        foc = tuple(float(v) for v in self.focal_point)
        if len(pos) != 3 or len(foc) != 3:
            raise ValueError("camera position and focal point must be 3-vectors")
        if not (all(map(math.isfinite, pos)) and all(map(math.isfinite, foc))):
            raise ValueError("camera coordinates must be finite")
        if pos == foc:
            raise ValueError("camera position and focal point coincide")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "focal_point", foc)


@dataclass(frozen=True)
class Ray:
    origin: np.ndarray
    direction: np.ndarray

    def at(self, t) -> np.ndarray:
        return self.origin + np.multiply.outer(t, self.direction)


@dataclass(frozen=True)
class RoomBounds:
    """Axis-aligned box that objects may occupy."""

    low: tuple[float, float, float] = (-6.0, 0.0, -4.0)
    high: tuple[float, float, float] = (6.0, 1.0, 4.0)

    def __post_init__(self):
        lo = np.asarray(self.low, dtype=float)
        hi = np.asarray(self.high, dtype=float)
        if lo.shape != (3,) or hi.shape != (3,) or not np.all(hi > lo):
            raise ValueError(f"degenerate room bounds {self.low!r} .. {self.high!r}")
        object.__setattr__(self, "low", tuple(lo.tolist()))
        object.__setattr__(self, "high", tuple(hi.tolist()))

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.high, self.low)))

    def contains(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return np.all((pts >= self.low) & (pts <= self.high), axis=-1)


def camera_basis(pose: CameraPose) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return unit (forward, right, up) vectors of the camera frame."""
    fwd = np.subtract(pose.focal_point, pose.position)
    fwd = fwd / np.linalg.norm(fwd)
    right = np.cross(fwd, _UP)
    norm = np.linalg.norm(right)
    if norm < 1e-12:
        # looking straight up or down; any horizontal right vector will do
        right = np.cross(fwd, np.array([0.0, 0.0, 1.0]))
        norm = np.linalg.norm(right)
    right = right / norm
    up = np.cross(right, fwd)
    return fwd, right, up


def project(point, pose: CameraPose, intr: CameraIntrinsics) -> tuple[float, float] | None:
    """Pixel coordinates of ``point``, or None if it is not in front of the camera."""
    fwd, right, up = camera_basis(pose)
    d = np.subtract(point, pose.position)
    z = float(d @ fwd)
    if z <= 0.0:
        return None
    f = intr.focal_px
    cx, cy = intr.center
    return cx + f * float(d @ right) / z, cy - f * float(d @ up) / z


def is_visible(point, pose: CameraPose, intr: CameraIntrinsics) -> bool:
    px = project(point, pose, intr)
    return px is not None and 0.0 <= px[0] <= intr.width and 0.0 <= px[1] <= intr.height


def backproject(pixel, pose: CameraPose, intr: CameraIntrinsics) -> Ray:
    fwd, right, up = camera_basis(pose)
    f = intr.focal_px
    cx, cy = intr.center
    direction = fwd + ((pixel[0] - cx) / f) * right - ((pixel[1] - cy) / f) * up
    return Ray(np.asarray(pose.position, dtype=float), direction / np.linalg.norm(direction))


def ray_box_segment(origin, direction, bounds: RoomBounds):
    """Parameter interval ``(t0, t1)`` with ``t >= 0`` where the ray is inside ``bounds``.

    Vectorised over leading axes of ``origin``/``direction``; returns arrays
    ``t0, t1, hit``.
    """
    o = np.asarray(origin, dtype=float)
    d = np.asarray(direction, dtype=float)
    lo = np.asarray(bounds.low)
    hi = np.asarray(bounds.high)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / d
        ta = (lo - o) * inv
        tb = (hi - o) * inv
    t_near = np.minimum(ta, tb)
    t_far = np.maximum(ta, tb)
    # axis-parallel rays: inside the slab means unbounded, outside means no hit
    parallel = d == 0.0
    inside = (o >= lo) & (o <= hi)
    t_near = np.where(parallel, np.where(inside, -np.inf, np.inf), t_near)
    t_far = np.where(parallel, np.where(inside, np.inf, -np.inf), t_far)
    t0 = np.maximum(np.max(t_near, axis=-1), 0.0)
    t1 = np.min(t_far, axis=-1)
    return t0, t1, t1 > t0


def pose_arrays(poses: Sequence[CameraPose]) -> dict[str, np.ndarray]:
    """Stack camera centres and bases of many poses for vectorised projection."""
    bases = [camera_basis(p) for p in poses]
    return {
        "position": np.array([p.position for p in poses], dtype=float).reshape(-1, 3),
        "forward": np.array([b[0] for b in bases]).reshape(-1, 3),
        "right": np.array([b[1] for b in bases]).reshape(-1, 3),
        "up": np.array([b[2] for b in bases]).reshape(-1, 3),
    }


def project_many(points, frames: dict[str, np.ndarray], intr: CameraIntrinsics):
    """Project points of shape (..., 3) into every frame.

    Returns ``(pixels, visible)`` with shapes (..., T, 2) and (..., T).
    """
    pts = np.asarray(points, dtype=float)
    d = pts[..., None, :] - frames["position"]
    z = np.einsum("...tk,tk->...t", d, frames["forward"])
    xr = np.einsum("...tk,tk->...t", d, frames["right"])
    yu = np.einsum("...tk,tk->...t", d, frames["up"])
    f = intr.focal_px
    cx, cy = intr.center
    in_front = z > 0.0
    safe_z = np.where(in_front, z, 1.0)
    px = np.stack([cx + f * xr / safe_z, cy - f * yu / safe_z], axis=-1)
    visible = in_front & (px[..., 0] >= 0.0) & (px[..., 0] <= intr.width)
    visible &= (px[..., 1] >= 0.0) & (px[..., 1] <= intr.height)
    return px, visible


@dataclass(frozen=True)
class TrajectoryParams:
    num_frames: int = 20
    path_sigma: float = 0.7
    path_length_scale: float = 2.5
    focal_sigma: float = 0.7
    focal_length_scale: float = 2.0
    camera_height: float = 2.0
    room_width: float = 12.0
    room_depth: float = 8.0
    path_margin: float = 1.0
    focal_height: float = 0.5

    def __post_init__(self):
        if int(self.num_frames) < 1:
            raise ValueError("num_frames must be at least 1")
        for name in ("path_sigma", "path_length_scale", "focal_sigma", "focal_length_scale"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.room_width <= 2 * self.path_margin or self.room_depth <= 2 * self.path_margin:
            raise ValueError("room too small for the path margin")


def rbf_kernel(t, sigma: float, length_scale: float) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    diff = t[:, None] - t[None, :]
    return sigma**2 * np.exp(-0.5 * (diff / length_scale) ** 2)


def sample_gp(t, sigma: float, length_scale: float, rng: np.random.Generator, size: int = 1) -> np.ndarray:
    """Zero-mean GP draws at inputs ``t``; shape (size, len(t)).

    Jitter of 1e-8 is added to the correlation matrix before factorising.
    """
    if sigma <= 0 or length_scale <= 0:
        raise ValueError("GP kernel parameters must be positive")
    t = np.asarray(t, dtype=float)
    corr = rbf_kernel(t, 1.0, length_scale) + 1e-8 * np.eye(t.size)
    chol = np.linalg.cholesky(corr)
    z = rng.standard_normal((size, t.size))
    return sigma * z @ chol.T


def sample_trajectory(params: TrajectoryParams, rng: np.random.Generator) -> list[CameraPose]:
    """Noisy elliptical loop around the room at constant height.

    Frames are taken at unit-spaced times; the base path makes one full loop
    starting at a random phase.  Positions get independent GP perturbations in
    x and z, focal points in all three components.
    """
    n = int(params.num_frames)
    t = np.arange(n, dtype=float)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    angle = phase + 2.0 * np.pi * t / n
    a = params.room_width / 2.0 - params.path_margin
    b = params.room_depth / 2.0 - params.path_margin
    path_noise = sample_gp(t, params.path_sigma, params.path_length_scale, rng, size=2)
    focal_noise = sample_gp(t, params.focal_sigma, params.focal_length_scale, rng, size=3)

    xs = a * np.cos(angle) + path_noise[0]
    zs = b * np.sin(angle) + path_noise[1]
    focal = np.array([0.0, params.focal_height, 0.0])[:, None] + focal_noise
    poses = []
    for i in range(n):
        pos = (float(xs[i]), float(params.camera_height), float(zs[i]))
        foc = tuple(float(v) for v in focal[:, i])
        poses.append(CameraPose(pos, foc))
    return poses
