import math

import numpy as np
import pytest

from mvtrack3d.core import (
    BBox2D,
    CameraPose,
    Detection,
    Vec3,
    Viewpoint,
    euclidean,
    iou_2d,
    quat_rotate,
)


def box(*coords):
    return BBox2D(*coords)


class TestIoU:
    def test_identical_boxes(self):
        b = box(0, 0, 1, 1)
        assert iou_2d(b, b) == 1.0

    def test_disjoint_boxes(self):
        assert iou_2d(box(0, 0, 1, 1), box(2, 2, 3, 3)) == 0.0

    def test_partial_overlap(self):
        # intersection 1, union 7
        assert iou_2d(box(0, 0, 2, 2), box(1, 1, 3, 3)) == pytest.approx(1 / 7, abs=1e-12)

    def test_degenerate_union(self):
        b = box(1, 1, 1, 1)
        assert iou_2d(b, b) == 0.0

    def test_symmetric_and_bounded(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            x = rng.uniform(-5, 5, size=8)
            a = box(min(x[0], x[1]), min(x[2], x[3]), max(x[0], x[1]), max(x[2], x[3]))
            b = box(min(x[4], x[5]), min(x[6], x[7]), max(x[4], x[5]), max(x[6], x[7]))
            v = iou_2d(a, b)
            assert v == iou_2d(b, a)
            assert 0.0 <= v <= 1.0


class TestEuclidean:
    def test_zero(self):
        assert euclidean(Vec3(0, 0, 0), Vec3(0, 0, 0)) == 0.0

    def test_pythagorean(self):
        assert euclidean(Vec3(0, 0, 0), Vec3(3, 4, 0)) == 5.0

    def test_offset(self):
        assert euclidean(Vec3(1, 2, 3), Vec3(4, 6, 3)) == 5.0

    def test_triangle_inequality(self):
        rng = np.random.default_rng(11)
        for _ in range(300):
            a, b, c = (Vec3(*rng.uniform(-2, 2, size=3)) for _ in range(3))
            assert euclidean(a, c) <= euclidean(a, b) + euclidean(b, c) + 1e-9


class TestValidation:
    def test_vec3_rejects_nan(self):
        with pytest.raises(ValueError):
            Vec3(float("nan"), 0, 0)

    def test_bbox_rejects_inverted(self):
        with pytest.raises(ValueError):
            BBox2D(1, 0, 0, 1)

    def test_pose_rejects_unnormalized_quaternion(self):
        with pytest.raises(ValueError):
            CameraPose(Vec3(0, 0, 0), (1.0, 1.0, 0.0, 0.0))

    def test_detection_confidence_range(self):
        with pytest.raises(ValueError):
            Detection(box(0, 0, 1, 1), Vec3(0, 0, 0), confidence=1.5)

    def test_detection_feature_norm(self):
        with pytest.raises(ValueError):
            Detection(box(0, 0, 1, 1), Vec3(0, 0, 0), 0.9, feature=np.array([1.0, 1.0]))
        d = Detection(box(0, 0, 1, 1), Vec3(0, 0, 0), 0.9, feature=np.array([0.6, 0.8]))
        assert d.feature is not None

    def test_viewpoint_rejects_negative_index(self):
        with pytest.raises(ValueError):
            Viewpoint(index=-1, pose=CameraPose(Vec3(0, 0, 0)))


class TestQuaternion:
    def test_identity_rotation(self):
        v = np.array([1.0, 2.0, 3.0])
        assert np.allclose(quat_rotate((1, 0, 0, 0), v), v)

    def test_half_turn_about_z(self):
        q = (0.0, 0.0, 0.0, 1.0)
        assert np.allclose(quat_rotate(q, np.array([1.0, 0.0, 0.0])), [-1.0, 0.0, 0.0])

    def test_world_camera_round_trip(self):
        s = math.sin(0.3 / 2)
        c = math.cos(0.3 / 2)
        pose = CameraPose(Vec3(0.2, -0.1, 0.5), (c, 0.0, s, 0.0))
        p = np.array([0.7, 0.3, 0.9])
        assert np.allclose(pose.camera_to_world(pose.world_to_camera(p)), p)
