import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import world_of
from metacog.core import Detection2D, FrameObservation, SceneData, Theta
from metacog.evaluation import (
    GroundTruthBox,
    accuracy_2d,
    accuracy_3d,
    detection_points_2d,
    faultiness,
    frame_accuracy_2d,
    jaccard,
    lw_accuracy,
    paired_bootstrap_ci,
    regress,
    rolling_accuracy_curve,
    theta_mse,
    truth_boxes,
    video_accuracy_2d,
    world_points_2d,
)
from metacog.geometry import CameraIntrinsics, CameraPose
from metacog.lightweight import LwFrame, LwTheta, LwWorldState


def test_theta_mse_examples():
    a = LwTheta([0.3], [0.4])
    assert theta_mse(a, a) == 0.0
    assert theta_mse(LwTheta([0.4], [0.6]), a) == pytest.approx(0.025)


def test_theta_mse_full_model_uses_miss():
    th = Theta([0.3], [0.6])  # miss 0.4
    assert theta_mse(th, LwTheta([0.4], [0.6])) == pytest.approx(0.025)
    with pytest.raises(ValueError):
        theta_mse(LwTheta([0.1, 0.2], [0.1, 0.2]), LwTheta([0.1], [0.1]))


unit = st.floats(0, 1)


@given(st.lists(st.tuples(unit, unit, unit, unit), min_size=1, max_size=6))
def test_theta_mse_properties(rows):
    a = LwTheta([r[0] for r in rows], [r[1] for r in rows])
    b = LwTheta([r[2] for r in rows], [r[3] for r in rows])
    assert theta_mse(a, b) == theta_mse(b, a) >= 0
    assert (theta_mse(a, b) == 0) == (a == b)


def test_jaccard_examples():
    assert jaccard(["chair", "chair", "bowl"], ["chair", "bowl"]) == 2 / 3
    assert jaccard(["tv", "bowl"], ["bowl", "tv"]) == 1.0
    assert jaccard(["tv"], ["bowl"]) == 0.0
    assert jaccard([], []) == 1.0


bags = st.lists(st.integers(0, 4), max_size=8)


@given(bags, bags, st.integers(0, 4))
def test_jaccard_properties(a, b, extra):
    assert jaccard(a, b) == jaccard(b, a)
    assert jaccard(a, a) == 1.0
    assert 0.0 <= jaccard(a, b) <= 1.0
    # adding a shared element never lowers the score
    assert jaccard(a + [extra], b + [extra]) >= jaccard(a, b) - 1e-12


def test_lw_accuracy_is_presence_jaccard():
    assert lw_accuracy(LwWorldState([1, 1, 0]), LwWorldState([1, 0, 0])) == 0.5


def test_faultiness_examples():
    w = LwWorldState([1, 0, 1, 0, 0])
    assert faultiness([LwFrame(w.presence)] * 3, w) == 0.0
    assert faultiness([LwFrame(~w.presence)] * 2, w) == 1.0
    assert faultiness([LwFrame([1, 0, 1, 1, 0])], w) == pytest.approx(0.2)
    with pytest.raises(ValueError):
        faultiness([], w)


@given(st.lists(st.lists(st.booleans(), min_size=4, max_size=4), min_size=1, max_size=10), st.randoms(use_true_random=False))
def test_faultiness_order_invariant(frames, rnd):
    w = LwWorldState([1, 0, 0, 1])
    shuffled = list(frames)
    rnd.shuffle(shuffled)
    assert faultiness(np.array(frames), w) == faultiness(np.array(shuffled), w)


def test_faultiness_linear_in_flip_rate():
    rng = np.random.default_rng(0)
    w = np.array([True, False, True, False, False])
    for q in (0.05, 0.2, 0.45):
        frames = np.where(rng.random((20_000, 5)) < q, ~w, w)
        assert faultiness(frames, w) == pytest.approx(q, abs=0.005)


def _box(x, y, c, hw=10.0):
    return GroundTruthBox(x, y, hw, hw, c)


def test_accuracy_2d_traces():
    assert frame_accuracy_2d([(0, 50.0, 50.0), (1, 10.0, 10.0)], [_box(50, 50, 0), _box(10, 10, 1)]) == 1.0
    assert frame_accuracy_2d([(0, 80.0, 50.0)], [_box(50, 50, 0)]) == 0.0
    assert frame_accuracy_2d([(0, 52.0, 49.0)], [_box(50, 50, 0), _box(200, 200, 0)]) == 0.5
    assert frame_accuracy_2d([], []) == 1.0
    assert frame_accuracy_2d([(2, 1.0, 1.0)], []) == 0.0
    # the category must agree for a pair to form
    assert frame_accuracy_2d([(1, 50.0, 50.0)], [_box(50, 50, 0)]) == 0.0


def test_box_validation():
    with pytest.raises(ValueError):
        GroundTruthBox(0, 0, 0, 5, 0)


def _brute_frame_score(points, boxes):
    correct = total = 0
    for c in {p[0] for p in points} | {b.category for b in boxes}:
        pts = [p for p in points if p[0] == c]
        bxs = [b for b in boxes if b.category == c]
        k = min(len(pts), len(bxs))
        best, best_cost = 0, math.inf
        for chosen in itertools.permutations(range(len(bxs)), k) if len(pts) <= len(bxs) else []:
            cost = sum(math.hypot(pts[i][1] - bxs[j].x, pts[i][2] - bxs[j].y) for i, j in enumerate(chosen))
            if cost < best_cost:
                best_cost, best = cost, sum(bxs[j].contains(pts[i][1], pts[i][2]) for i, j in enumerate(chosen))
        for chosen in itertools.permutations(range(len(pts)), k) if len(pts) > len(bxs) else []:
            cost = sum(math.hypot(pts[i][1] - bxs[j].x, pts[i][2] - bxs[j].y) for j, i in enumerate(chosen))
            if cost < best_cost:
                best_cost, best = cost, sum(bxs[j].contains(pts[i][1], pts[i][2]) for j, i in enumerate(chosen))
        correct += best
        total += max(len(pts), len(bxs))
    return 1.0 if total == 0 else correct / total


coord = st.floats(0, 100, allow_nan=False)


@settings(max_examples=150, deadline=None)
@given(
    st.lists(st.tuples(st.integers(0, 1), coord, coord), max_size=5),
    st.lists(st.tuples(st.integers(0, 1), coord, coord, st.floats(1, 40)), max_size=5),
    st.randoms(use_true_random=False),
)
def test_accuracy_2d_matches_brute_force_and_ignores_order(points, raw_boxes, rnd):
    boxes = [_box(x, y, c, hw) for c, x, y, hw in raw_boxes]
    got = frame_accuracy_2d(points, boxes)
    assert got == pytest.approx(_brute_frame_score(points, boxes))
    p2, b2 = list(points), list(boxes)
    rnd.shuffle(p2)
    rnd.shuffle(b2)
    assert frame_accuracy_2d(p2, b2) == pytest.approx(got)


def test_video_and_overall_means():
    frames_a = [[(0, 50.0, 50.0)], [(0, 90.0, 50.0)]]
    boxes_a = [[_box(50, 50, 0)], [_box(50, 50, 0)]]
    assert video_accuracy_2d(frames_a, boxes_a) == 0.5
    assert accuracy_2d([frames_a, [[]]], [boxes_a, [[]]]) == 0.75
    with pytest.raises(ValueError):
        video_accuracy_2d(frames_a, boxes_a[:1])


def test_world_points_and_truth_boxes(intr):
    pose = CameraPose((0.0, 0.5, 5.0), (0.0, 0.5, 0.0))
    frames = (FrameObservation(pose, (Detection2D(400.0, 400.0, 1),)),)
    truth = world_of(((0.0, 0.5, 0.0), 1), ((0.0, 0.5, 9.0), 2))  # second one is behind the camera
    pts = world_points_2d(truth, frames, intr)
    assert pts == [[(1, pytest.approx(400.0), pytest.approx(400.0))]]
    boxes = truth_boxes(SceneData(frames, truth), intr)
    assert len(boxes[0]) == 1 and boxes[0][0].half_width == 100.0
    assert video_accuracy_2d(detection_points_2d(frames), boxes) == 1.0


def test_accuracy_3d_examples():
    w = world_of(((1, 0.5, 1), 0), ((-2, 0.5, 0), 3))
    assert accuracy_3d(w, w) == (1.0, 0.0)
    jac, dist = accuracy_3d(world_of(((1.3, 0.5, 1.4), 0)), world_of(((1, 0.5, 1), 0)))
    assert jac == 1.0 and dist == pytest.approx(0.5)
    assert accuracy_3d(world_of(((1, 0.5, 1), 0)), world_of(((1, 0.5, 1), 2))) == (0.0, None)


def test_rolling_curve_clusters():
    x = np.r_[np.full(10, 0.1), np.full(10, 0.4)]
    y = np.r_[np.ones(10), np.full(10, 0.5)]
    c = rolling_accuracy_curve(x, y)
    assert np.all(np.diff(c.x) > 0)
    near = dict(zip(np.round(c.x, 2), c.y))
    assert near[0.1] == 1.0 and near[0.12] == 1.0 and near[0.4] == 0.5 and near[0.37] == 0.5
    assert 0.25 not in near  # no samples within 0.05


def test_rolling_curve_constant():
    rng = np.random.default_rng(1)
    c = rolling_accuracy_curve(rng.random(200) * 0.5, np.full(200, 0.8))
    assert np.allclose(c.y, 0.8)
    with pytest.raises(ValueError):
        rolling_accuracy_curve([], [])


def test_paired_bootstrap():
    rng = np.random.default_rng(2)
    a = rng.normal(1.0, 1.0, 200)
    mean, lo, hi = paired_bootstrap_ci(a + 0.5, a)
    assert mean == pytest.approx(0.5) and lo == pytest.approx(0.5) and hi == pytest.approx(0.5)
    mean, lo, hi = paired_bootstrap_ci(a, np.zeros(200))
    assert lo < mean < hi and lo > 0


def test_regress_slope():
    x = np.linspace(0, 1, 50)
    assert regress(x, 2 * x + 1).slope == pytest.approx(2.0)
