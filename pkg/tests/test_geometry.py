import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metacog.geometry import (
    CameraIntrinsics,
    CameraPose,
    RoomBounds,
    TrajectoryParams,
    backproject,
    camera_basis,
    is_visible,
    pose_arrays,
    project,
    project_many,
    ray_box_segment,
    rbf_kernel,
    sample_gp,
    sample_trajectory,
)


def test_intrinsics_validation():
    with pytest.raises(ValueError):
        CameraIntrinsics(0, 10)
    with pytest.raises(ValueError):
        CameraIntrinsics(vertical_fov=180)
    assert CameraIntrinsics().focal_px == pytest.approx(400 / math.tan(math.radians(30)))


def test_pose_rejects_coincident_points():
    with pytest.raises(ValueError):
        CameraPose((1, 2, 3), (1, 2, 3))


def test_focal_point_projects_to_centre(pose, intr):
    assert project(pose.focal_point, pose, intr) == pytest.approx((400.0, 400.0))
    assert is_visible(pose.focal_point, pose, intr)


def test_behind_camera_is_absent(pose, intr):
    assert project((0.0, 0.5, 6.0), pose, intr) is None
    assert not is_visible((0.0, 0.5, 6.0), pose, intr)


def test_right_edge(pose, intr):
    # camera looks along -z with +y up, so image right is +x; tan(30 deg) * distance lands on the edge
    dist = 5.0
    point = (math.tan(math.radians(30)) * dist, 0.5, 0.0)
    x, y = project(point, pose, intr)
    assert x == pytest.approx(800.0, abs=1e-9) and y == pytest.approx(400.0, abs=1e-9)
    assert is_visible(point, pose, intr)
    beyond = (math.tan(math.radians(30)) * dist + 0.01, 0.5, 0.0)
    assert project(beyond, pose, intr)[0] > 800.0
    assert not is_visible(beyond, pose, intr)


def test_image_y_grows_downward(pose, intr):
    above = project((0.0, 1.5, 0.0), pose, intr)
    assert above[1] < 400.0


def test_centre_ray_is_view_axis(pose, intr):
    ray = backproject((400.0, 400.0), pose, intr)
    axis = np.subtract(pose.focal_point, pose.position)
    assert ray.direction == pytest.approx(axis / np.linalg.norm(axis))
    assert np.linalg.norm(ray.direction) == pytest.approx(1.0, abs=1e-12)


def test_corner_ray_angle(pose, intr):
    ray = backproject((0.0, 0.0), pose, intr)
    fwd, right, up = camera_basis(pose)
    t = math.tan(math.radians(30))
    # camera-frame components (-t, +t, 1), normalised
    expected = (-t * right + t * up + fwd) / math.sqrt(1 + 2 * t * t)
    assert ray.direction == pytest.approx(expected, abs=1e-12)
    assert math.degrees(math.acos(ray.direction @ fwd)) == pytest.approx(
        math.degrees(math.atan(math.sqrt(2) * t)), abs=1e-9
    )


def test_round_trip_random_pixels():
    rng = np.random.default_rng(0)
    intr = CameraIntrinsics()
    worst = 0.0
    for _ in range(1000):
        pose = CameraPose(tuple(rng.uniform(-5, 5, 3)), tuple(rng.uniform(-5, 5, 3)))
        px = rng.uniform(0, 800, 2)
        ray = backproject(px, pose, intr)
        for t in rng.uniform(0.1, 20, 3):
            back = project(ray.at(t), pose, intr)
            worst = max(worst, float(np.hypot(back[0] - px[0], back[1] - px[1])))
    assert worst <= 1e-6


@settings(max_examples=100, deadline=None)
@given(
    st.tuples(st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10)),
    st.tuples(st.floats(-6, 6), st.floats(-1, 3), st.floats(-6, 6)),
)
def test_visible_implies_projection(point, cam):
    pose = CameraPose(cam, (0.0, 0.5, 0.0)) if cam != (0.0, 0.5, 0.0) else CameraPose((0, 2, 5), (0, 0.5, 0))
    intr = CameraIntrinsics()
    px = project(point, pose, intr)
    if is_visible(point, pose, intr):
        assert px is not None
    if px is None:
        assert not is_visible(point, pose, intr)


def test_vertical_view_has_basis():
    pose = CameraPose((0.0, 5.0, 0.0), (0.0, 0.0, 0.0))
    fwd, right, up = camera_basis(pose)
    assert abs(fwd @ right) < 1e-12 and abs(fwd @ up) < 1e-12
    assert project((0, 0, 0), pose, CameraIntrinsics()) == pytest.approx((400, 400))


def test_project_many_agrees_with_project():
    rng = np.random.default_rng(3)
    intr = CameraIntrinsics()
    poses = [CameraPose(tuple(rng.uniform(-5, 5, 3)), tuple(rng.uniform(-1, 1, 3))) for _ in range(6)]
    pts = rng.uniform(-4, 4, size=(10, 3))
    px, vis = project_many(pts, pose_arrays(poses), intr)
    for i, p in enumerate(pts):
        for t, pose in enumerate(poses):
            single = project(p, pose, intr)
            assert vis[i, t] == is_visible(p, pose, intr)
            if single is not None:
                assert px[i, t] == pytest.approx(single, abs=1e-9)


def test_ray_box_segment():
    b = RoomBounds()
    t0, t1, hit = ray_box_segment(np.array([0.0, 2.0, 0.0]), np.array([0.0, -1.0, 0.0]), b)
    assert hit and t0 == pytest.approx(1.0) and t1 == pytest.approx(2.0)
    _, _, hit = ray_box_segment(np.array([0.0, 2.0, 0.0]), np.array([0.0, 1.0, 0.0]), b)
    assert not hit
    # axis-parallel ray outside a slab misses
    _, _, hit = ray_box_segment(np.array([0.0, 2.0, 0.0]), np.array([1.0, 0.0, 0.0]), b)
    assert not hit


def test_room_bounds_validation():
    with pytest.raises(ValueError):
        RoomBounds((0, 0, 0), (1, 0, 1))
    assert RoomBounds().volume == pytest.approx(96.0)


def test_trajectory_height_and_count():
    poses = sample_trajectory(TrajectoryParams(), np.random.default_rng(0))
    assert len(poses) == 20
    assert all(p.position[1] == 2.0 for p in poses)


def test_trajectory_deterministic():
    a = sample_trajectory(TrajectoryParams(num_frames=7), np.random.default_rng(5))
    b = sample_trajectory(TrajectoryParams(num_frames=7), np.random.default_rng(5))
    assert a == b


def test_trajectory_degenerate_kernel_is_exact_loop():
    tp = TrajectoryParams(path_sigma=1e-12, focal_sigma=1e-12)
    poses = sample_trajectory(tp, np.random.default_rng(2))
    a, b = 6.0 - 1.0, 4.0 - 1.0
    for p in poses:
        x, _, z = p.position
        assert (x / a) ** 2 + (z / b) ** 2 == pytest.approx(1.0, abs=1e-9)
        assert p.focal_point == pytest.approx((0.0, 0.5, 0.0), abs=1e-9)


def test_trajectory_rejects_bad_kernel():
    with pytest.raises(ValueError):
        TrajectoryParams(path_sigma=0.0)
    with pytest.raises(ValueError):
        sample_gp(np.arange(3.0), -1.0, 1.0, np.random.default_rng(0))


def test_gp_covariance_matches_rbf():
    t = np.arange(20, dtype=float)
    draws = sample_gp(t, 0.7, 2.5, np.random.default_rng(11), size=1000)
    emp = np.cov(draws, rowvar=False)
    target = rbf_kernel(t, 0.7, 2.5)
    # sd of a covariance estimate is at most sigma**2 * sqrt(2 / n) ~ 0.022
    assert np.max(np.abs(emp - target)) < 0.1
    assert np.mean(np.abs(emp - target)) < 0.03
