import json
import math

import numpy as np
import pytest

from panelsim.geometry import Pose, rot_x, rot_z
from panelsim.perception import (
    ApproachConvention,
    CameraIntrinsics,
    DetectionNoise,
    DetectionUnusable,
    OrientedDetection,
    PerceptionIncomplete,
    deproject,
    grasp_pose_from_detections,
    load_detections,
    project,
    synthetic_detect,
    top_down_camera_pose,
)
from panelsim.scene import PanelGeometry

CAM = CameraIntrinsics(f_x=600.0, f_y=600.0, c_x=320.0, c_y=240.0)
NO_NOISE = DetectionNoise()


def panel_at(x, y, z, yaw):
    return Pose(np.array([x, y, z]), rot_z(yaw)), PanelGeometry()


def split(dets):
    patch = next(((d, z) for d, z in dets if d.cls == "patch"), (None, None))
    conn = next(((d, z) for d, z in dets if d.cls == "connector"), (None, None))
    return patch, conn


class TestProjectDeproject:
    def test_principal_point(self):
        pose = Pose.identity()
        p = deproject(np.array([CAM.c_x, CAM.c_y]), 1.2, CAM, pose)
        assert np.allclose(p, [0.0, 0.0, 1.2])

    def test_pinhole_formula(self):
        p = deproject(np.array([920.0, 240.0]), 1.2, CAM, Pose.identity())
        assert np.allclose(p, [1.2, 0.0, 1.2])

    def test_composed_with_camera_offset(self):
        pose = Pose(np.array([0.1, 0.0, 0.0]), np.eye(3))
        p = deproject(np.array([920.0, 240.0]), 1.2, CAM, pose)
        assert np.allclose(p, [1.3, 0.0, 1.2])

    def test_depth_homogeneity(self):
        pixel = np.array([410.0, 300.0])
        p1 = deproject(pixel, 1.0, CAM, Pose.identity())
        p3 = deproject(pixel, 3.0, CAM, Pose.identity())
        assert np.allclose(p3, 3.0 * p1)

    def test_nonpositive_depth_rejected(self):
        with pytest.raises(ValueError):
            deproject(np.array([0.0, 0.0]), -0.5, CAM, Pose.identity())

    def test_nan_depth_unusable(self):
        with pytest.raises(DetectionUnusable):
            deproject(np.array([0.0, 0.0]), float("nan"), CAM, Pose.identity())

    def test_round_trip(self):
        rng = np.random.default_rng(23)
        cam_pose = top_down_camera_pose([0.4, 0.1, 1.5], yaw=0.3)
        for _ in range(100):
            p = np.array([rng.uniform(0.1, 0.7), rng.uniform(-0.3, 0.5), rng.uniform(0.0, 0.5)])
            pixel, depth = project(p, cam_pose, CAM)
            back = deproject(pixel, depth, CAM, cam_pose)
            assert np.allclose(back, p, atol=1e-12)


class TestSyntheticDetect:
    def test_on_axis_connector(self):
        cam_pose = top_down_camera_pose([0.0, 0.0, 1.0])
        pose = Pose(np.zeros(3), np.eye(3))
        geom = PanelGeometry(grapple_offset=np.zeros(3))
        dets = synthetic_detect([(pose, geom)], cam_pose, CAM, NO_NOISE)
        (_, _), (conn, depth) = split(dets)
        assert np.allclose(conn.center, [CAM.c_x, CAM.c_y])
        assert abs(depth - 1.0) < 1e-12

    def test_zero_noise_round_trip(self):
        cam_pose = top_down_camera_pose([0.45, 0.15, 1.2])
        pose, geom = panel_at(0.5, 0.2, 0.01, 0.4)
        dets = synthetic_detect([(pose, geom)], cam_pose, CAM, NO_NOISE)
        (_, _), (conn, depth) = split(dets)
        truth = pose.position + pose.rotation @ geom.grapple_offset
        back = deproject(conn.center, depth, CAM, cam_pose)
        assert np.allclose(back, truth, atol=1e-9)

    def test_miss_rate_one_empty(self):
        cam_pose = top_down_camera_pose([0.0, 0.0, 1.0])
        dets = synthetic_detect(
            [panel_at(0.0, 0.0, 0.0, 0.0)], cam_pose, CAM, DetectionNoise(miss_rate=1.0)
        )
        assert dets == []

    def test_behind_camera_emits_nothing(self):
        cam_pose = top_down_camera_pose([0.0, 0.0, 1.0])
        dets = synthetic_detect([panel_at(0.0, 0.0, 2.0, 0.0)], cam_pose, CAM, NO_NOISE)
        assert dets == []

    def test_seeded_reproducibility(self):
        cam_pose = top_down_camera_pose([0.0, 0.0, 1.0])
        noise = DetectionNoise(pixel_sigma=1.0, depth_sigma=0.01, angle_sigma=0.02, seed=42)
        a = synthetic_detect([panel_at(0.1, 0.0, 0.0, 0.2)], cam_pose, CAM, noise)
        b = synthetic_detect([panel_at(0.1, 0.0, 0.0, 0.2)], cam_pose, CAM, noise)
        for (da, za), (db, zb) in zip(a, b):
            assert np.array_equal(da.center, db.center)
            assert da.angle == db.angle and za == zb


class TestGraspPose:
    def test_axis_aligned(self):
        cam_pose = top_down_camera_pose([0.0, 0.0, 1.0])
        pose = Pose(np.zeros(3), np.eye(3))
        geom = PanelGeometry()
        dets = synthetic_detect([(pose, geom)], cam_pose, CAM, NO_NOISE)
        (patch, _), (conn, depth) = split(dets)
        r_d = grasp_pose_from_detections(patch, conn, depth, CAM, cam_pose)
        truth = pose.rotation @ geom.grapple_offset
        assert np.allclose(r_d.position, truth, atol=1e-9)
        # top-down tool orientation, yaw zero
        assert np.allclose(r_d.rotation, rot_x(math.pi), atol=1e-9)

    @pytest.mark.parametrize("yaw", [0.0, math.pi / 6, -2.0, 2.8, math.pi - 0.05])
    def test_yaw_recovery(self, yaw):
        cam_pose = top_down_camera_pose([0.45, 0.15, 1.2], yaw=0.2)
        pose, geom = panel_at(0.5, 0.2, 0.01, yaw)
        dets = synthetic_detect([(pose, geom)], cam_pose, CAM, NO_NOISE)
        (patch, _), (conn, depth) = split(dets)
        r_d = grasp_pose_from_detections(patch, conn, depth, CAM, cam_pose)
        recovered = math.atan2(r_d.rotation[1, 0], r_d.rotation[0, 0])
        err = math.atan2(math.sin(recovered - yaw), math.cos(recovered - yaw))
        assert abs(err) < 1e-9

    def test_random_placements_round_trip(self):
        rng = np.random.default_rng(31)
        cam_pose = top_down_camera_pose([0.45, 0.0, 1.4], yaw=-0.1)
        for _ in range(500):
            yaw = rng.uniform(-math.pi, math.pi)
            pose, geom = panel_at(
                rng.uniform(0.3, 0.6), rng.uniform(-0.2, 0.2), rng.uniform(0.0, 0.05), yaw
            )
            dets = synthetic_detect([(pose, geom)], cam_pose, CAM, NO_NOISE)
            (patch, _), (conn, depth) = split(dets)
            r_d = grasp_pose_from_detections(patch, conn, depth, CAM, cam_pose)
            truth = pose.position + pose.rotation @ geom.grapple_offset
            assert np.allclose(r_d.position, truth, atol=1e-9)
            recovered = math.atan2(r_d.rotation[1, 0], r_d.rotation[0, 0])
            err = math.atan2(math.sin(recovered - yaw), math.cos(recovered - yaw))
            assert abs(err) < 1e-9

    def test_depth_error_moves_along_ray(self):
        cam_pose = top_down_camera_pose([0.4, 0.0, 1.2])
        pose, geom = panel_at(0.5, 0.1, 0.0, 0.0)
        dets = synthetic_detect([(pose, geom)], cam_pose, CAM, NO_NOISE)
        (patch, _), (conn, depth) = split(dets)
        clean = grasp_pose_from_detections(patch, conn, depth, CAM, cam_pose)
        shifted = grasp_pose_from_detections(patch, conn, depth + 0.05, CAM, cam_pose)
        delta = shifted.position - clean.position
        ray = clean.position - cam_pose.position
        # displacement lies along the deprojection ray, scaled by depth error
        assert np.allclose(np.cross(delta, ray), 0.0, atol=1e-9)
        assert abs(np.linalg.norm(delta) - 0.05 * np.linalg.norm(ray) / depth) < 1e-9

    def test_missing_class_raises(self):
        det = OrientedDetection("patch", np.array([1.0, 1.0]), np.array([5.0, 5.0]), 0.0)
        with pytest.raises(PerceptionIncomplete):
            grasp_pose_from_detections(det, None, 1.0, CAM, Pose.identity())
        with pytest.raises(PerceptionIncomplete):
            grasp_pose_from_detections(det, det, 1.0, CAM, Pose.identity())


class TestReplayFile:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "detections.jsonl"
        records = [
            {"class": "patch", "center": [320.0, 240.0], "extent": [100.0, 80.0], "angle": 0.1, "confidence": 0.9, "depth": 1.2},
            {"class": "connector", "center": [300.0, 250.0], "extent": [12.0, 12.0], "angle": 0.0, "depth": 1.15},
        ]
        path.write_text("\n".join(json.dumps(r) for r in records) + "\n")
        dets = load_detections(path)
        assert len(dets) == 2
        assert dets[0][0].cls == "patch" and dets[0][1] == 1.2
        assert dets[1][0].cls == "connector" and dets[1][0].confidence == 1.0
