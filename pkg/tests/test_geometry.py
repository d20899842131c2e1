import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation as ScipyRotation

from panelsim.geometry import (
    AxisAngle,
    Pose,
    ee_orientation,
    relative_axis_angle,
    rot_x,
    rot_y,
    rot_z,
    rotation_from_axis_angle,
    transform_point,
)


def random_rotation(rng):
    # uniform via random quaternion
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    return ScipyRotation.from_quat([q[1], q[2], q[3], q[0]]).as_matrix()


class TestRotationFromAxisAngle:
    def test_zero_angle_is_identity(self):
        R = rotation_from_axis_angle(AxisAngle(np.array([0.0, 0.0, 1.0]), 0.0))
        assert np.array_equal(R, np.eye(3))

    def test_elementary_z_rotation(self):
        R = rotation_from_axis_angle(AxisAngle(np.array([0.0, 0.0, 1.0]), math.pi / 2))
        expected = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        assert np.allclose(R, expected, atol=1e-12)

    def test_diagonal_axis_cyclic_permutation(self):
        # Rodrigues formula evaluated termwise: rotating 2*pi/3 about the
        # (1,1,1) diagonal cyclically permutes the coordinate axes.
        a = np.ones(3) / math.sqrt(3.0)
        R = rotation_from_axis_angle(AxisAngle(a, 2.0 * math.pi / 3.0))
        expected = np.array([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        assert np.allclose(R, expected, atol=1e-12)

    def test_rejects_non_unit_axis(self):
        with pytest.raises(ValueError):
            rotation_from_axis_angle(AxisAngle(np.array([1.0, 1.0, 0.0]), 0.5))

    def test_agrees_with_quaternion_construction(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            a = rng.normal(size=3)
            a /= np.linalg.norm(a)
            theta = rng.uniform(0.0, math.pi)
            R = rotation_from_axis_angle(AxisAngle(a, theta))
            R_ref = ScipyRotation.from_rotvec(a * theta).as_matrix()
            assert np.linalg.norm(R - R_ref) < 1e-12


class TestRelativeAxisAngle:
    def test_identity_pair(self):
        aa = relative_axis_angle(np.eye(3), np.eye(3))
        assert aa.angle == 0.0
        assert np.array_equal(aa.axis, np.array([1.0, 0.0, 0.0]))

    def test_elementary_rotation(self):
        aa = relative_axis_angle(np.eye(3), rot_z(math.pi / 2))
        assert np.allclose(aa.axis, [0.0, 0.0, 1.0], atol=1e-12)
        assert abs(aa.angle - math.pi / 2) < 1e-12

    def test_common_prefix_cancels(self):
        # quaternion-log oracle: relative rotation of Rx(a) and Rx(a)Ry(b)
        aa = relative_axis_angle(rot_x(math.pi / 4), rot_x(math.pi / 4) @ rot_y(0.3))
        assert np.allclose(aa.axis, [0.0, 1.0, 0.0], atol=1e-12)
        assert abs(aa.angle - 0.3) < 1e-12

    def test_round_trip_random_pairs(self):
        rng = np.random.default_rng(11)
        for _ in range(1000):
            R_A, R_B = random_rotation(rng), random_rotation(rng)
            aa = relative_axis_angle(R_A, R_B)
            assert 0.0 <= aa.angle <= math.pi
            assert abs(np.linalg.norm(aa.axis) - 1.0) < 1e-12
            assert np.linalg.norm(rotation_from_axis_angle(aa) - R_A.T @ R_B) < 1e-9

    def test_near_pi_axis_is_canonical(self):
        R = rot_z(math.pi)
        aa = relative_axis_angle(np.eye(3), R)
        assert abs(aa.angle - math.pi) < 1e-12
        assert aa.axis[2] > 0.0


class TestEeOrientation:
    def test_zero_angle_returns_start(self):
        assert np.allclose(ee_orientation(np.eye(3), np.array([0.0, 0.0, 1.0]), 0.0), np.eye(3))

    def test_commuting_composition(self):
        R = ee_orientation(rot_z(math.pi / 2), np.array([0.0, 0.0, 1.0]), math.pi / 2)
        assert np.allclose(R, rot_z(math.pi), atol=1e-12)

    def test_recovers_target_of_pair(self):
        R_A = rot_x(0.7)
        R_B = R_A @ rot_y(0.4) @ rot_z(-0.2)
        aa = relative_axis_angle(R_A, R_B)
        assert np.linalg.norm(ee_orientation(R_A, aa.axis, aa.angle) - R_B) < 1e-9

    def test_recovers_target_random_pairs(self):
        rng = np.random.default_rng(13)
        for _ in range(1000):
            R_A, R_B = random_rotation(rng), random_rotation(rng)
            aa = relative_axis_angle(R_A, R_B)
            assert np.linalg.norm(ee_orientation(R_A, aa.axis, aa.angle) - R_B) < 1e-9

    def test_rejects_bad_axis(self):
        with pytest.raises(ValueError):
            ee_orientation(np.eye(3), np.array([0.0, 0.0, 2.0]), 0.1)


class TestTransformPoint:
    def test_identity(self):
        p = transform_point(np.zeros(3), Pose.identity())
        assert np.array_equal(p, np.zeros(3))

    def test_hand_checkable(self):
        pose = Pose(np.array([0.0, 0.0, 1.0]), rot_z(math.pi / 2))
        p = transform_point(np.array([1.0, 0.0, 0.0]), pose)
        assert np.allclose(p, [0.0, 1.0, 1.0], atol=1e-12)

    def test_composition_associativity(self):
        rng = np.random.default_rng(17)
        a = Pose(rng.normal(size=3), random_rotation(rng))
        b = Pose(rng.normal(size=3), random_rotation(rng))
        p = np.array([0.1, 0.2, 0.3])
        via_compose = transform_point(p, a.compose(b))
        via_chain = transform_point(transform_point(p, b), a)
        assert np.allclose(via_compose, via_chain, atol=1e-12)


class TestPose:
    def test_unknown_frame_rejected(self):
        with pytest.raises(ValueError):
            Pose(np.zeros(3), np.eye(3), frame="nope")

    def test_inverse_round_trip(self):
        rng = np.random.default_rng(19)
        pose = Pose(rng.normal(size=3), random_rotation(rng))
        ident = pose.compose(pose.inverse())
        assert np.allclose(ident.position, 0.0, atol=1e-12)
        assert np.allclose(ident.rotation, np.eye(3), atol=1e-12)

    def test_non_rotation_rejected(self):
        with pytest.raises(ValueError):
            Pose(np.zeros(3), np.eye(3) * 1.5)
