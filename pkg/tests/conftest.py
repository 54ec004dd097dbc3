import numpy as np
import pytest

from metacog.core import Object3D, WorldState
from metacog.geometry import CameraIntrinsics, CameraPose


@pytest.fixture
def intr():
    return CameraIntrinsics()


@pytest.fixture
def pose():
    # camera 5 units in front of the origin looking at it along -z
    return CameraPose((0.0, 0.5, 5.0), (0.0, 0.5, 0.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def world_of(*objs):
    return WorldState(tuple(Object3D(p, c) for p, c in objs))
