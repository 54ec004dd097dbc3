"""Meta-cognitive inference of detector error rates and 3-d world states."""
from .core import (
    DEFAULT_CATEGORIES,
    CategoryTable,
    Detection2D,
    FrameObservation,
    MetaBeliefs,
    Object3D,
    SceneData,
    Theta,
    WorldState,
)
from .estimators import LesionedLightweightMetaCOG, LesionedMetaCOG, LightweightMetaCOG, MetaCOG
from .geometry import CameraIntrinsics, CameraPose
from .inference import FilterConfig, reinfer, run_filter
from .lightweight import LwConfig, LwDetectorData, LwTheta, LwWorldState, lw_reinfer, lw_run_filter

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_CATEGORIES",
    "CameraIntrinsics",
    "CameraPose",
    "CategoryTable",
    "Detection2D",
    "FilterConfig",
    "FrameObservation",
    "LesionedLightweightMetaCOG",
    "LesionedMetaCOG",
    "LightweightMetaCOG",
    "LwConfig",
    "LwDetectorData",
    "LwTheta",
    "LwWorldState",
    "MetaBeliefs",
    "MetaCOG",
    "Object3D",
    "SceneData",
    "Theta",
    "WorldState",
    "lw_reinfer",
    "lw_run_filter",
    "reinfer",
    "run_filter",
]
