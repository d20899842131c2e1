"""Rotation algebra, frames, and axis-angle utilities.

Rotations are plain 3x3 numpy arrays validated on construction of the
wrapper types below. The axis-angle extraction goes through a unit
quaternion, which stays well-conditioned near both ends of the [0, pi]
angle range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "FRAMES",
    "AxisAngle",
    "Pose",
    "check_rotation",
    "rotation_from_axis_angle",
    "relative_axis_angle",
    "ee_orientation",
    "transform_point",
    "rot_x",
    "rot_y",
    "rot_z",
    "orthonormalize",
    "rotvec_from_rotation",
    "rotation_from_rotvec",
]

# Registered frame identifiers: per-arm base frames, wrist sensor frames,
# camera frames, and the shared world frame.
FRAMES = frozenset(
    {
        "world",
        "base_left",
        "base_right",
        "sensor_left",
        "sensor_right",
        "camera_left",
        "camera_right",
    }
)

_ROT_TOL = 1e-9
_AXIS_TOL = 1e-6


def check_rotation(R: np.ndarray, tol: float = _ROT_TOL) -> np.ndarray:
    """Validate that R is a proper rotation (orthonormal, det +1)."""
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        raise ValueError(f"rotation must be 3x3, got {R.shape}")
    err = np.linalg.norm(R @ R.T - np.eye(3))
    if err > tol:
        raise ValueError(f"matrix is not orthonormal (|RR^T - I| = {err:.3g})")
    if abs(np.linalg.det(R) - 1.0) > tol:
        raise ValueError("matrix has det != +1 (improper rotation)")
    return R


def orthonormalize(R: np.ndarray) -> np.ndarray:
    """Project a drifted matrix back onto SO(3) (polar projection via SVD)."""
    U, _, Vt = np.linalg.svd(np.asarray(R, dtype=float))
    D = np.diag([1.0, 1.0, np.sign(np.linalg.det(U @ Vt))])
    return U @ D @ Vt


@dataclass(frozen=True)
class AxisAngle:
    """Unit rotation axis and angle, canonical with angle in [0, pi]."""

    axis: np.ndarray
    angle: float

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float)
        object.__setattr__(self, "axis", axis)
        if axis.shape != (3,):
            raise ValueError("axis must be a 3-vector")
        if abs(np.linalg.norm(axis) - 1.0) > _AXIS_TOL:
            raise ValueError(f"axis is not unit length: |a| = {np.linalg.norm(axis)}")


@dataclass(frozen=True)
class Pose:
    """Rigid transform: position plus rotation, tagged with its frame."""

    position: np.ndarray
    rotation: np.ndarray
    frame: str = "world"

    def __post_init__(self):
        p = np.asarray(self.position, dtype=float)
        object.__setattr__(self, "position", p)
        object.__setattr__(self, "rotation", check_rotation(self.rotation))
        if p.shape != (3,):
            raise ValueError("position must be a 3-vector")
        if self.frame not in FRAMES:
            raise ValueError(f"unknown frame {self.frame!r}")

    @staticmethod
    def identity(frame: str = "world") -> "Pose":
        return Pose(np.zeros(3), np.eye(3), frame)

    def compose(self, other: "Pose") -> "Pose":
        """self o other: other expressed through this transform."""
        return Pose(
            self.position + self.rotation @ other.position,
            self.rotation @ other.rotation,
            self.frame,
        )

    def inverse(self) -> "Pose":
        Rt = self.rotation.T
        return Pose(-(Rt @ self.position), Rt, self.frame)


def rot_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation_from_axis_angle(aa: AxisAngle) -> np.ndarray:
    """Rodrigues formula: the rotation by aa.angle about aa.axis."""
    a = aa.axis
    if abs(np.linalg.norm(a) - 1.0) > _AXIS_TOL:
        raise ValueError("axis must be unit length")
    if aa.angle == 0.0:
        return np.eye(3)
    c, s = math.cos(aa.angle), math.sin(aa.angle)
    K = np.array(
        [
            [0.0, -a[2], a[1]],
            [a[2], 0.0, -a[0]],
            [-a[1], a[0], 0.0],
        ]
    )
    return np.eye(3) + s * K + (1.0 - c) * (K @ K)


def _quat_from_rotation(R: np.ndarray) -> np.ndarray:
    """Unit quaternion (w, x, y, z) from a rotation matrix (Shepperd)."""
    t = np.trace(R)
    if t > 0.0:
        w = math.sqrt(1.0 + t) / 2.0
        f = 1.0 / (4.0 * w)
        q = np.array(
            [w, (R[2, 1] - R[1, 2]) * f, (R[0, 2] - R[2, 0]) * f, (R[1, 0] - R[0, 1]) * f]
        )
    else:
        i = int(np.argmax(np.diag(R)))
        j, k = (i + 1) % 3, (i + 2) % 3
        x = math.sqrt(max(0.0, 1.0 + R[i, i] - R[j, j] - R[k, k])) / 2.0
        f = 1.0 / (4.0 * x)
        q = np.empty(4)
        q[0] = (R[k, j] - R[j, k]) * f
        q[1 + i] = x
        q[1 + j] = (R[j, i] + R[i, j]) * f
        q[1 + k] = (R[k, i] + R[i, k]) * f
    if q[0] < 0.0:
        q = -q
    return q / np.linalg.norm(q)


def _canonical_axis(axis: np.ndarray) -> np.ndarray:
    """Pick the antipodal representative whose first nonzero entry is > 0."""
    for v in axis:
        if v != 0.0:
            return axis if v > 0.0 else -axis
    return axis


def relative_axis_angle(R_A: np.ndarray, R_B: np.ndarray) -> AxisAngle:
    """Axis-angle of the relative rotation R_A^T R_B, canonical form.

    Angle is in [0, pi]. At angle 0 the axis defaults to (1, 0, 0); at
    angle pi the antipodal ambiguity is resolved by making the first
    nonzero axis component positive.
    """
    R = R_A.T @ R_B
    q = _quat_from_rotation(R)
    vec_norm = float(np.linalg.norm(q[1:]))
    angle = 2.0 * math.atan2(vec_norm, q[0])
    if vec_norm < 1e-12 or angle < 1e-12:
        return AxisAngle(np.array([1.0, 0.0, 0.0]), 0.0)
    axis = q[1:] / vec_norm
    if abs(angle - math.pi) < 1e-9:
        axis = _canonical_axis(axis)
    return AxisAngle(axis, angle)


def ee_orientation(R_A: np.ndarray, a: np.ndarray, theta: float) -> np.ndarray:
    """End-effector orientation after rotating by theta about the fixed axis a.

    Returns R_A R(a, theta): at theta=0 this is R_A, and at the relative
    angle of a pair (R_A, R_B) it recovers R_B.
    """
    a = np.asarray(a, dtype=float)
    if abs(np.linalg.norm(a) - 1.0) > _AXIS_TOL:
        raise ValueError("axis must be unit length")
    return R_A @ rotation_from_axis_angle(AxisAngle(a, theta))


def transform_point(p: np.ndarray, pose_of_frame: Pose) -> np.ndarray:
    """Map a point expressed in the frame with the given pose into the parent."""
    return pose_of_frame.rotation @ np.asarray(p, dtype=float) + pose_of_frame.position


def rotvec_from_rotation(R: np.ndarray) -> np.ndarray:
    """Rotation vector (axis * angle) of R, angle in [0, pi]."""
    aa = relative_axis_angle(np.eye(3), R)
    return aa.axis * aa.angle


def rotation_from_rotvec(v: np.ndarray) -> np.ndarray:
    """Inverse of rotvec_from_rotation."""
    v = np.asarray(v, dtype=float)
    angle = float(np.linalg.norm(v))
    if angle < 1e-15:
        return np.eye(3)
    return rotation_from_axis_angle(AxisAngle(v / angle, angle))
