"""Static world model: panel geometry, lift-phase bounds, control points.

The four panel corners serve as collision control points during the lift.
Their base-frame coordinates follow the end-effector state plus the fixed
rotation about the lift axis, and the margins against the keep-out plane,
the virtual wall, and the table height are what the lift controller
constrains.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import AxisAngle, rotation_from_axis_angle

__all__ = [
    "PanelGeometry",
    "EnvironmentParams",
    "ConstraintParams",
    "LiftBeforeGraspError",
    "control_points",
    "constraint_eval",
]


class LiftBeforeGraspError(RuntimeError):
    """Raised when lift constraints are evaluated before z_min was recorded."""


def _default_corners(width: float, height: float) -> np.ndarray:
    """Rectangle corners of the width x height face, in the panel frame.

    Ordering: v1 is the top-right corner seen from a top view (+x, +y),
    then counterclockwise.
    """
    hw, hh = width / 2.0, height / 2.0
    return np.array(
        [
            [hw, hh, 0.0],
            [-hw, hh, 0.0],
            [-hw, -hh, 0.0],
            [hw, -hh, 0.0],
        ]
    )


@dataclass(frozen=True)
class PanelGeometry:
    """One modular panel: plate dimensions, grapple adapter, connectors.

    Panel frame: origin at the plate center, x along the width, y along
    the height, z normal to the plate.  The rods sit on the -y edge and
    point -y; the receiving holes sit on the +y edge and open +y, so two
    panels at equal yaw mate edge to edge.  corner_offsets carry the z of
    the grapple interface plane so that a corner sitting exactly at the
    grasp height has zero vertical offset from the end-effector.
    """

    width: float = 0.5
    height: float = 0.5
    thickness: float = 0.02
    mass: float = 1.0
    grapple_offset: np.ndarray = field(
        default_factory=lambda: np.array([0.0, -0.05, 0.01])
    )
    rod_positions: np.ndarray = field(default_factory=lambda: np.empty(0))
    hole_positions: np.ndarray = field(default_factory=lambda: np.empty(0))
    corner_offsets: np.ndarray = field(default_factory=lambda: np.empty(0))
    rod_length: float = 0.015

    def __post_init__(self):
        if self.mass <= 0.0:
            raise ValueError("panel mass must be positive")
        if min(self.width, self.height, self.thickness) <= 0.0:
            raise ValueError("panel dimensions must be positive")
        object.__setattr__(
            self, "grapple_offset", np.asarray(self.grapple_offset, dtype=float)
        )
        zc = self.grapple_offset[2]
        if np.size(self.corner_offsets) == 0:
            corners = _default_corners(self.width, self.height)
            corners[:, 2] = zc
            object.__setattr__(self, "corner_offsets", corners)
        else:
            object.__setattr__(
                self, "corner_offsets", np.asarray(self.corner_offsets, dtype=float)
            )
        if self.corner_offsets.shape != (4, 3):
            raise ValueError("corner_offsets must be four 3-vectors")
        inset = 0.05 * self.width
        hw, hh = self.width / 2.0 - inset, self.height / 2.0
        if np.size(self.rod_positions) == 0:
            object.__setattr__(
                self,
                "rod_positions",
                np.array([[hw, -hh, 0.0], [-hw, -hh, 0.0]]),
            )
        else:
            object.__setattr__(
                self, "rod_positions", np.asarray(self.rod_positions, dtype=float)
            )
        if np.size(self.hole_positions) == 0:
            object.__setattr__(
                self,
                "hole_positions",
                np.array([[-hw, hh, 0.0], [hw, hh, 0.0]]),
            )
        else:
            object.__setattr__(
                self, "hole_positions", np.asarray(self.hole_positions, dtype=float)
            )


@dataclass
class EnvironmentParams:
    """Lift-phase bounds expressed in one arm's base frame.

    b_collision is the keep-out plane along base x (strictly positive),
    y_wall the virtual wall separating the arms, z_min the height recorded
    at grasp (unset until then).  y_wall_sign flips the wall inequality for
    the mirrored arm: margin = y_wall_sign * (v_y - y_wall).
    """

    b_collision: float
    y_wall: float
    z_min: Optional[float] = None
    y_wall_sign: float = 1.0
    frame: str = "base_left"

    def __post_init__(self):
        if self.b_collision <= 0.0:
            raise ValueError("b_collision must be strictly positive")
        if self.y_wall_sign not in (1.0, -1.0):
            raise ValueError("y_wall_sign must be +1 or -1")

    def record_z_min(self, z: float) -> None:
        if self.z_min is not None:
            raise RuntimeError("z_min is already set for this run")
        self.z_min = float(z)


@dataclass(frozen=True)
class ConstraintParams:
    """Parameter vector of the lift constraints: start orientation, lift
    axis, payload geometry, environment bounds."""

    R_A: np.ndarray
    a: np.ndarray
    panel: PanelGeometry
    env: EnvironmentParams

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        object.__setattr__(self, "a", a)
        if abs(np.linalg.norm(a) - 1.0) > 1e-6:
            raise ValueError("lift axis must be unit length")

    def require_z_min(self) -> float:
        if self.env.z_min is None:
            raise LiftBeforeGraspError(
                "z_min is unset: lift constraints evaluated before grasp"
            )
        return self.env.z_min


def _ee_corner_offsets(panel: PanelGeometry) -> np.ndarray:
    # corners relative to the end-effector, which sits at the grapple point
    return panel.corner_offsets - panel.grapple_offset


def control_points(x: np.ndarray, s: ConstraintParams) -> np.ndarray:
    """Base-frame coordinates of the four panel corners at state (x,y,z,theta).

    v_i = p + R_A R(a, theta) c_i with c_i the corner offset from the
    end-effector; ordering is v1 top-right then counterclockwise.
    """
    x = np.asarray(x, dtype=float)
    R = s.R_A @ rotation_from_axis_angle(AxisAngle(s.a, float(x[3])))
    return x[:3] + _ee_corner_offsets(s.panel) @ R.T


def constraint_eval(x: np.ndarray, s: ConstraintParams) -> np.ndarray:
    """Collision margins for the four control points, nonnegative iff feasible.

    Returns the 12-vector (v_x,i - b_collision, sign*(v_y,i - y_wall),
    v_z,i - z_min) for i = 1..4.
    """
    z_min = s.require_z_min()
    v = control_points(x, s)
    env = s.env
    return np.concatenate(
        [
            v[:, 0] - env.b_collision,
            env.y_wall_sign * (v[:, 1] - env.y_wall),
            v[:, 2] - z_min,
        ]
    )
