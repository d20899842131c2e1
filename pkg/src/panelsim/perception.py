"""Synthetic oriented-bounding-box detection and the deprojection chain.

Stands in for the neural detector: panel patches and grapple connectors
are projected through a pinhole model, perturbed with a parametric noise
model, and turned back into a desired grasp pose by deprojection.  A
JSON Lines replay file with the same record shape can substitute for the
synthetic detector.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .geometry import Pose, rot_x, rot_z, transform_point
from .scene import PanelGeometry

__all__ = [
    "CameraIntrinsics",
    "OrientedDetection",
    "DetectionNoise",
    "ApproachConvention",
    "PerceptionIncomplete",
    "DetectionUnusable",
    "project",
    "synthetic_detect",
    "deproject",
    "grasp_pose_from_detections",
    "load_detections",
    "top_down_camera_pose",
]


class PerceptionIncomplete(RuntimeError):
    """A required detection class is missing; the caller should re-trigger."""


class DetectionUnusable(RuntimeError):
    """Depth reading is missing or NaN; the caller should retry."""


@dataclass(frozen=True)
class CameraIntrinsics:
    f_x: float
    f_y: float
    c_x: float
    c_y: float
    depth_scale: float = 1.0

    def __post_init__(self):
        if self.f_x <= 0.0 or self.f_y <= 0.0:
            raise ValueError("focal lengths must be positive")


@dataclass(frozen=True)
class OrientedDetection:
    """Oriented box in the image plane; angle is defined modulo pi."""

    cls: str
    center: np.ndarray
    extent: np.ndarray
    angle: float
    confidence: float = 1.0

    def __post_init__(self):
        center = np.asarray(self.center, dtype=float)
        extent = np.asarray(self.extent, dtype=float)
        if self.cls not in ("patch", "connector"):
            raise ValueError(f"unknown detection class {self.cls!r}")
        if np.any(extent <= 0.0):
            raise ValueError("extent must be positive")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must be in [0, 1]")
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "extent", extent)


@dataclass(frozen=True)
class DetectionNoise:
    pixel_sigma: float = 0.0
    depth_sigma: float = 0.0
    angle_sigma: float = 0.0
    miss_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if min(self.pixel_sigma, self.depth_sigma, self.angle_sigma) < 0.0:
            raise ValueError("noise sigmas must be nonnegative")
        if not 0.0 <= self.miss_rate <= 1.0:
            raise ValueError("miss_rate must be in [0, 1]")


@dataclass(frozen=True)
class ApproachConvention:
    """How a patch box angle plus connector point define the 6-D grasp pose.

    Roll and pitch are fixed to the top-down grasp (tool z pointing down);
    the yaw ambiguity of the rectangular patch (an oriented box angle is
    defined modulo pi) is resolved by the patch-center-to-connector
    direction, which in the panel frame is offset_dir.
    """

    offset_dir: np.ndarray = None

    def __post_init__(self):
        d = self.offset_dir
        d = np.array([0.0, -1.0]) if d is None else np.asarray(d, dtype=float)
        n = np.linalg.norm(d)
        object.__setattr__(self, "offset_dir", d / n if n > 0 else d)


def top_down_camera_pose(position, yaw: float = 0.0, frame: str = "world") -> Pose:
    """Camera hovering at `position`, optical axis pointing straight down."""
    return Pose(np.asarray(position, dtype=float), rot_z(yaw) @ rot_x(math.pi), frame)


def project(
    point: np.ndarray, cam_pose: Pose, cam: CameraIntrinsics
) -> Tuple[np.ndarray, float]:
    """Pinhole projection of a base-frame point: returns (pixel, depth)."""
    p_c = cam_pose.rotation.T @ (np.asarray(point, dtype=float) - cam_pose.position)
    depth = float(p_c[2])
    if depth <= 0.0:
        raise ValueError("point is behind the camera")
    u = cam.c_x + cam.f_x * p_c[0] / depth
    v = cam.c_y + cam.f_y * p_c[1] / depth
    return np.array([u, v]), depth


def _wrap_mod_pi(angle: float) -> float:
    """Wrap an oriented-box angle into (-pi/2, pi/2]."""
    a = math.fmod(angle, math.pi)
    if a > math.pi / 2:
        a -= math.pi
    elif a <= -math.pi / 2:
        a += math.pi
    return a


def synthetic_detect(
    panels: Sequence[Tuple[Pose, PanelGeometry]],
    cam_pose: Pose,
    cam: CameraIntrinsics,
    noise: DetectionNoise,
    rng: Optional[np.random.Generator] = None,
) -> List[Tuple[OrientedDetection, float]]:
    """Geometric stand-in for the detector network.

    Projects each panel's patch (the plate) and connector (the grapple
    point) through the pinhole model, perturbs pixel, depth, and angle
    with the noise model, and drops detections with probability
    miss_rate.  Targets behind the camera emit nothing.  Deterministic
    for a given seed.
    """
    if rng is None:
        rng = np.random.default_rng(noise.seed)
    out: List[Tuple[OrientedDetection, float]] = []
    for pose, geom in panels:
        targets = []
        # patch: plate center with the panel x axis giving the box angle
        x_axis_cam = cam_pose.rotation.T @ pose.rotation[:, 0]
        patch_angle = math.atan2(x_axis_cam[1], x_axis_cam[0])
        targets.append(("patch", pose.position, patch_angle, (geom.width, geom.height)))
        connector = transform_point(geom.grapple_offset, pose)
        targets.append(("connector", connector, patch_angle, (0.04, 0.04)))
        for cls, point, angle, size in targets:
            # consume the random stream uniformly so one miss does not
            # reshuffle the noise of later detections
            miss = rng.uniform()
            px_noise = rng.normal(scale=noise.pixel_sigma, size=2) if noise.pixel_sigma else np.zeros(2)
            d_noise = rng.normal(scale=noise.depth_sigma) if noise.depth_sigma else 0.0
            a_noise = rng.normal(scale=noise.angle_sigma) if noise.angle_sigma else 0.0
            try:
                pixel, depth = project(point, cam_pose, cam)
            except ValueError:
                continue
            if miss < noise.miss_rate:
                continue
            extent = np.array([size[0] * cam.f_x / depth, size[1] * cam.f_y / depth])
            det = OrientedDetection(
                cls=cls,
                center=pixel + px_noise,
                extent=extent,
                angle=_wrap_mod_pi(angle + a_noise),
            )
            out.append((det, depth + d_noise))
    return out


def deproject(
    pixel: np.ndarray, depth: float, cam: CameraIntrinsics, cam_pose_in_base: Pose
) -> np.ndarray:
    """Pixel + depth back to a 3-D point in the camera pose's parent frame."""
    if depth is None or (isinstance(depth, float) and math.isnan(depth)):
        raise DetectionUnusable("depth reading is missing")
    d = float(depth) * cam.depth_scale
    if d <= 0.0:
        raise ValueError("depth must be positive")
    u, v = float(pixel[0]), float(pixel[1])
    p_cam = np.array([(u - cam.c_x) / cam.f_x * d, (v - cam.c_y) / cam.f_y * d, d])
    return transform_point(p_cam, cam_pose_in_base)


def grasp_pose_from_detections(
    patch: OrientedDetection,
    connector: OrientedDetection,
    connector_depth: float,
    cam: CameraIntrinsics,
    cam_pose: Pose,
    convention: ApproachConvention = ApproachConvention(),
) -> Pose:
    """Desired grasp pose from the patch + connector detection pair.

    Position is the deprojected connector point; orientation is the
    top-down approach yawed by the patch angle mapped into the base
    frame, with the half-turn ambiguity resolved by the connector offset
    direction.
    """
    if patch is None or connector is None:
        raise PerceptionIncomplete("both a patch and a connector detection are required")
    if patch.cls != "patch" or connector.cls != "connector":
        raise PerceptionIncomplete(
            f"expected (patch, connector), got ({patch.cls}, {connector.cls})"
        )
    position = deproject(connector.center, connector_depth, cam, cam_pose)

    # image-plane box direction back into the base frame
    d_cam = np.array([math.cos(patch.angle), math.sin(patch.angle), 0.0])
    d_base = cam_pose.rotation @ d_cam
    yaw = math.atan2(d_base[1], d_base[0])

    # resolve the mod-pi ambiguity using the patch->connector direction
    patch_point = deproject(patch.center, connector_depth, cam, cam_pose)
    observed = (position - patch_point)[:2]
    if np.linalg.norm(observed) > 1e-9:
        best, best_dot = yaw, -np.inf
        for cand in (yaw, yaw + math.pi):
            expected = rot_z(cand)[:2, :2] @ convention.offset_dir
            dot = float(expected @ observed)
            if dot > best_dot:
                best, best_dot = cand, dot
        yaw = math.atan2(math.sin(best), math.cos(best))

    orientation = rot_z(yaw) @ rot_x(math.pi)  # tool z pointing down
    return Pose(position, orientation, cam_pose.frame)


def load_detections(path) -> List[Tuple[OrientedDetection, float]]:
    """Read a detection-replay JSON Lines file (one record per line)."""
    out: List[Tuple[OrientedDetection, float]] = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            det = OrientedDetection(
                cls=rec["class"],
                center=np.asarray(rec["center"], dtype=float),
                extent=np.asarray(rec["extent"], dtype=float),
                angle=float(rec["angle"]),
                confidence=float(rec.get("confidence", 1.0)),
            )
            out.append((det, float(rec["depth"])))
    return out
