import math

import numpy as np
import pytest

from panelsim.geometry import AxisAngle, rot_x, rot_z, rotation_from_axis_angle
from panelsim.scene import (
    ConstraintParams,
    EnvironmentParams,
    LiftBeforeGraspError,
    PanelGeometry,
    constraint_eval,
    control_points,
)

Z_AXIS = np.array([0.0, 0.0, 1.0])


def centered_panel(width=0.5, height=0.5):
    # grapple at the panel center, corners in the grapple plane
    return PanelGeometry(
        width=width, height=height, grapple_offset=np.array([0.0, 0.0, 0.0])
    )


def make_params(panel=None, R_A=None, a=Z_AXIS, b=0.1, y_wall=-1.0, z_min=-1.0):
    env = EnvironmentParams(b_collision=b, y_wall=y_wall, z_min=z_min)
    return ConstraintParams(
        R_A=np.eye(3) if R_A is None else R_A,
        a=a,
        panel=centered_panel() if panel is None else panel,
        env=env,
    )


class TestPanelGeometry:
    def test_default_corner_ordering(self):
        p = PanelGeometry()
        # v1 top-right from top view, then counterclockwise
        assert np.allclose(p.corner_offsets[0][:2], [0.25, 0.25])
        assert np.allclose(p.corner_offsets[1][:2], [-0.25, 0.25])
        assert np.allclose(p.corner_offsets[2][:2], [-0.25, -0.25])
        assert np.allclose(p.corner_offsets[3][:2], [0.25, -0.25])

    def test_rejects_nonpositive_mass(self):
        with pytest.raises(ValueError):
            PanelGeometry(mass=0.0)

    def test_rods_and_holes_on_opposite_edges(self):
        p = PanelGeometry()
        assert np.all(p.rod_positions[:, 1] < 0)
        assert np.all(p.hole_positions[:, 1] > 0)


class TestEnvironmentParams:
    def test_b_collision_strictly_positive(self):
        with pytest.raises(ValueError):
            EnvironmentParams(b_collision=0.0, y_wall=0.0)

    def test_z_min_set_once(self):
        env = EnvironmentParams(b_collision=0.1, y_wall=0.0)
        env.record_z_min(0.05)
        with pytest.raises(RuntimeError):
            env.record_z_min(0.06)


class TestControlPoints:
    def test_identity_placement(self):
        s = make_params(panel=centered_panel(0.5, 0.5))
        v = control_points(np.zeros(4), s)
        assert np.allclose(v[0], [0.25, 0.25, 0.0])
        assert np.allclose(v[1], [-0.25, 0.25, 0.0])
        assert np.allclose(v[2], [-0.25, -0.25, 0.0])
        assert np.allclose(v[3], [0.25, -0.25, 0.0])

    def test_pure_translation(self):
        s = make_params(panel=centered_panel(0.5, 0.5))
        v0 = control_points(np.zeros(4), s)
        v = control_points(np.array([0.6, 0.0, 0.4, 0.0]), s)
        assert np.allclose(v, v0 + np.array([0.6, 0.0, 0.4]))

    def test_rotated_panel_matches_rigid_transform_oracle(self):
        panel = centered_panel(0.5, 0.3)
        s = make_params(panel=panel)
        x = np.array([0.6, 0.0, 0.4, math.pi / 2])
        v = control_points(x, s)
        # oracle: apply the orientation formula then add the position
        R = rotation_from_axis_angle(AxisAngle(Z_AXIS, math.pi / 2))
        expected = x[:3] + (panel.corner_offsets @ R.T)
        assert np.allclose(v, expected, atol=1e-12)

    def test_grapple_offset_shifts_corners(self):
        panel = PanelGeometry(grapple_offset=np.array([0.0, -0.05, 0.01]))
        s = make_params(panel=panel)
        v = control_points(np.zeros(4), s)
        # corners are true panel corners relative to the off-center grapple
        assert np.allclose(v[0], [0.25, 0.30, 0.0])

    def test_rigidity_under_rotation(self):
        panel = centered_panel(0.5, 0.3)
        rng = np.random.default_rng(3)
        s = make_params(panel=panel, R_A=rot_x(0.3) @ rot_z(0.8))
        ref = control_points(np.zeros(4), s)
        ref_d = np.linalg.norm(ref[:, None, :] - ref[None, :, :], axis=-1)
        for _ in range(50):
            x = np.concatenate([rng.normal(size=3), [rng.uniform(-math.pi, math.pi)]])
            v = control_points(x, s)
            d = np.linalg.norm(v[:, None, :] - v[None, :, :], axis=-1)
            assert np.allclose(d, ref_d, atol=1e-9)


class TestConstraintEval:
    def test_uniform_margin(self):
        s = make_params(b=0.1, y_wall=-0.5, z_min=0.2)
        # place the EE so every corner sits +0.1 beyond every bound
        x = np.array([0.2 + 0.25, -0.4 + 0.25, 0.3, 0.0])
        m = constraint_eval(x, s)
        assert m.shape == (12,)
        assert np.allclose(np.sort(m)[:4], 0.1)  # binding corners at +0.1
        assert np.all(m >= 0.1 - 1e-12)

    def test_sign_of_violation(self):
        s = make_params(b=0.1, y_wall=-10.0, z_min=0.0)
        x = np.array([5.0, 0.0, -0.05, 0.0])
        m = constraint_eval(x, s)
        assert np.allclose(m[8:], -0.05)

    def test_margins_affine_in_position(self):
        s = make_params()
        x = np.array([1.0, 0.5, 0.7, 0.4])
        delta = np.array([0.03, -0.02, 0.05])
        m0 = constraint_eval(x, s)
        m1 = constraint_eval(np.concatenate([x[:3] + delta, x[3:]]), s)
        shift = np.concatenate([np.full(4, delta[0]), np.full(4, delta[1]), np.full(4, delta[2])])
        assert np.allclose(m1 - m0, shift, atol=1e-12)

    def test_wall_sign_flip(self):
        env = EnvironmentParams(b_collision=0.1, y_wall=0.5, z_min=0.0, y_wall_sign=-1.0)
        s = ConstraintParams(np.eye(3), Z_AXIS, centered_panel(), env)
        m = constraint_eval(np.array([1.0, 0.0, 1.0, 0.0]), s)
        # corners at y = +-0.25, wall at 0.5 with flipped side: feasible
        assert np.all(m[4:8] > 0)

    def test_z_min_unset_raises(self):
        env = EnvironmentParams(b_collision=0.1, y_wall=0.0)
        s = ConstraintParams(np.eye(3), Z_AXIS, centered_panel(), env)
        with pytest.raises(LiftBeforeGraspError):
            constraint_eval(np.zeros(4), s)

    def test_rotated_case_matches_oracle(self):
        panel = centered_panel(0.5, 0.3)
        s = make_params(panel=panel, b=0.1, y_wall=-0.6, z_min=0.1)
        x = np.array([0.6, 0.0, 0.4, math.pi / 2])
        v = control_points(x, s)
        m = constraint_eval(x, s)
        assert np.allclose(m[:4], v[:, 0] - 0.1)
        assert np.allclose(m[4:8], v[:, 1] + 0.6)
        assert np.allclose(m[8:], v[:, 2] - 0.1)
