"""Input checks shared by the estimators and the command line."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .core import SceneData, Theta
from .lightweight import LwDetectorData


def check_scenes(scenes, n_categories: int) -> list[SceneData]:
    if isinstance(scenes, SceneData):
        scenes = [scenes]
    scenes = list(scenes)
    for i, s in enumerate(scenes):
        if not isinstance(s, SceneData):
            raise TypeError(f"scene {i} is {type(s).__name__}, expected SceneData")
        for t, frame in enumerate(s.frames):
            for det in frame.detections:
                if det.category >= n_categories:
                    raise ValueError(
                        f"scene {i} frame {t}: detection category {det.category} outside table of size {n_categories}"
                    )
    return scenes


def check_lw_data(data) -> LwDetectorData:
    if isinstance(data, LwDetectorData):
        return data
    if isinstance(data, np.ndarray) and data.ndim == 2:
        data = [data]
    return LwDetectorData(tuple(data))


def check_theta(theta, n_categories: int | None = None) -> Theta:
    if not isinstance(theta, Theta):
        arr = np.asarray(theta, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != 2:
            raise ValueError("theta must be a Theta or a (2, C) array of hallucination and detection rates")
        theta = Theta(arr[0], arr[1])
    if n_categories is not None and theta.n_categories != n_categories:
        raise ValueError(f"theta covers {theta.n_categories} categories, expected {n_categories}")
    return theta


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or int(value) != value or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_probability_vector(values: Sequence[float], name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or not np.all((arr >= 0) & (arr <= 1)):
        raise ValueError(f"{name} must be a 1-d vector of probabilities")
    return arr
