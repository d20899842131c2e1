"""Dual-arm assembly pipeline: detect, approach, grasp, lift, insert.

One sequential orchestration loop owns the world and walks the state
machine Init -> Detect -> Approach -> Grasp -> Lift -> AssemblyPosition
-> Insert -> Done, with any phase able to drop to Failed carrying a
modality.  Both arms run through every phase together: impedance tracking
on approach, receding-horizon lift control per arm, then the Yielding arm
holds its pose compliantly (rigid along x and in yaw) while the Driving
arm regulates a -35 N push until the rods seat.

Trials are deterministic functions of (config, seed): panel poses and
detection noise come from one seeded generator, the physics and solvers
are deterministic, and logs carry no wall-clock data.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .config import ScenarioConfig
from .geometry import Pose, relative_axis_angle, rot_x, rot_z, rotation_from_rotvec, rotvec_from_rotation
from .impedance import ImpedanceParams, ImpedanceReference, TaskState, impedance_step
from .nmpc import LiftGoal, NmpcController, OcpConfig, input_map
from .perception import (
    CameraIntrinsics,
    DetectionNoise,
    PerceptionIncomplete,
    deproject,
    grasp_pose_from_detections,
    synthetic_detect,
    top_down_camera_pose,
)
from .scene import ConstraintParams, EnvironmentParams, PanelGeometry
from .simworld import (
    ArmState,
    ContactParams,
    GraspFailure,
    PanelState,
    TableParams,
    WorldState,
    grasp_lock,
    insertion_status,
    measure_wrench,
    place_ee,
    world_step,
    zero_sensor,
)
from .wrench_control import Wrench, WrenchCommand, force_control_step

__all__ = ["Phase", "MODALITIES", "TrialOutcome", "run_trial", "run_batch", "summarize"]

ROLES = ("driving", "yielding")
MODALITIES = ("failed-grasp", "failed-insertion", "solver-abort", "timeout")


class Phase(str, enum.Enum):
    INIT = "Init"
    DETECT = "Detect"
    APPROACH = "Approach"
    GRASP = "Grasp"
    LIFT = "Lift"
    ASSEMBLY_POSITION = "AssemblyPosition"
    INSERT = "Insert"
    DONE = "Done"
    FAILED = "Failed"


@dataclass
class TrialOutcome:
    """Bookkeeping for one trial, Table-style."""

    success: bool
    modality: Optional[str]
    phase_times: List[Tuple[str, float]]
    peak_insert_force_n: float
    final_depth_m: float
    seed: int

    def to_dict(self) -> dict:
        return {
            "success": self.success,
            "modality": self.modality,
            "phase_times": [[p, t] for p, t in self.phase_times],
            "peak_insert_force_n": self.peak_insert_force_n,
            "final_depth_m": self.final_depth_m,
            "seed": self.seed,
        }


class _TrialFailure(Exception):
    def __init__(self, modality: str):
        assert modality in MODALITIES
        super().__init__(modality)
        self.modality = modality


def _yaw(R: np.ndarray) -> float:
    return math.atan2(R[1, 0], R[0, 0])


def _theta_about(R_now: np.ndarray, R_A: np.ndarray, a: np.ndarray) -> float:
    """Signed rotation angle of R_now relative to R_A, projected on axis a."""
    aa = relative_axis_angle(R_A, R_now)
    if aa.angle < 1e-12:
        return 0.0
    return aa.angle * (1.0 if float(aa.axis @ a) >= 0.0 else -1.0)


class _Trial:
    """Mutable state of one trial run; `run` walks the state machine."""

    def __init__(self, cfg: ScenarioConfig, seed: int, randomize: bool):
        self.cfg = cfg
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.dt = cfg.pipeline.sim_dt_s
        self.decim = cfg.pipeline.log_decimation
        self.tick = 0
        self.records: List[dict] = []
        self.phase_times: List[Tuple[str, float]] = []
        self.phase = Phase.INIT
        self.commands: Dict[str, np.ndarray] = {}
        self.nmpc_diag: Optional[Dict[str, dict]] = None
        self.peak_insert_force = 0.0
        self.final_depth = 0.0

        wc = cfg.world
        self.contact = ContactParams(
            k_e=wc.contact.stiffness_npm,
            c_e=wc.contact.damping_nspm,
            mu=wc.contact.friction_coeff,
            capture_radius=wc.contact.capture_radius_m,
            capture_angle=wc.contact.capture_angle_rad,
            hole_clearance=wc.contact.hole_clearance_m,
            chamfer_width=wc.contact.chamfer_width_m,
            depth_threshold=wc.contact.depth_threshold_m,
        )
        self.panel_geom = PanelGeometry(
            width=wc.panel.width_m,
            height=wc.panel.height_m,
            thickness=wc.panel.thickness_m,
            mass=wc.panel.mass_kg,
            rod_length=wc.panel.rod_length_m,
        )
        self.arm_of = {
            "driving": cfg.pipeline.driving_arm,
            "yielding": cfg.pipeline.yielding_arm,
        }
        self.panel_of = {"driving": 0, "yielding": 1}

        # sample initial panel poses (the rng draw order is fixed so runs
        # with identical seeds are identical)
        rest_z = (
            wc.table_height_m
            + wc.panel.thickness_m / 2.0
            - wc.panel.mass_kg * wc.gravity_mps2 / (4.0 * wc.contact.stiffness_npm)
        )
        rand = cfg.randomization
        panels = []
        arms = {}
        for role in ROLES:
            nominal = wc.driving_panel if role == "driving" else wc.yielding_panel
            x, y, yaw = nominal.x_m, nominal.y_m, nominal.yaw_rad
            if randomize:
                x += self.rng.uniform(-rand.x_halfrange_m, rand.x_halfrange_m)
                y += self.rng.uniform(-rand.y_halfrange_m, rand.y_halfrange_m)
                yaw += self.rng.uniform(-rand.yaw_halfrange_rad, rand.yaw_halfrange_rad)
            rot = rot_z(yaw)
            panels.append(
                PanelState(np.array([x, y, rest_z]), rot, self.panel_geom, np.zeros(3))
            )
            # home the end-effector above the nominal grapple point
            hover = np.array([x, y, 0.0]) + rot @ self.panel_geom.grapple_offset
            hover[2] = wc.table_height_m + wc.ee_home_height_m
            arms[self.arm_of[role]] = ArmState(hover, rot_x(math.pi), np.zeros(6))
        self.world = WorldState(
            time=0.0,
            arms=arms,
            panels=panels,
            table=TableParams(height=wc.table_height_m),
            gravity=wc.gravity_mps2,
            ee_lag_tau=wc.ee_lag_tau_s,
            contacts=[],
        )

        cam = cfg.perception.camera
        self.cam = CameraIntrinsics(f_x=cam.fx_px, f_y=cam.fy_px, c_x=cam.cx_px, c_y=cam.cy_px)
        self.cam_pose = top_down_camera_pose([cam.x_m, cam.y_m, cam.z_m], yaw=cam.yaw_rad)
        self.noise = DetectionNoise(
            pixel_sigma=cfg.perception.noise.pixel_sigma_px,
            depth_sigma=cfg.perception.noise.depth_sigma_m,
            angle_sigma=cfg.perception.noise.angle_sigma_rad,
            miss_rate=cfg.perception.noise.miss_rate,
        )

        self.z_min: Dict[str, float] = {}
        self.R_A: Dict[str, np.ndarray] = {}
        self.lift_end_pose: Dict[str, Pose] = {}

    # -- logging -----------------------------------------------------

    @property
    def t(self) -> float:
        return self.tick * self.dt

    def arm(self, role: str) -> ArmState:
        return self.world.arms[self.arm_of[role]]

    def _log(self, force: bool = False) -> None:
        if not force and self.tick % self.decim != 0:
            return
        arms = {}
        for role in ROLES:
            arm = self.arm(role)
            wrench = measure_wrench(self.world, self.arm_of[role], self.contact)
            cmd = self.commands.get(self.arm_of[role], np.zeros(6))
            arms[role] = {
                "pose": [float(arm.pos[0]), float(arm.pos[1]), float(arm.pos[2]), _yaw(arm.rot)],
                "twist": [float(v) for v in arm.twist],
                "wrench_S": [float(v) for v in wrench.vector()],
                "command": [float(v) for v in cmd],
            }
        rec = {"t": self.t, "phase": self.phase.value, "arms": arms}
        if self.nmpc_diag is not None:
            rec["nmpc"] = self.nmpc_diag
            self.nmpc_diag = None
        contacts = self.world.contacts
        if contacts:
            rec["contacts"] = {
                "count": len(contacts),
                "max_force_n": max(float(np.linalg.norm(c.force)) for c in contacts),
            }
        else:
            rec["contacts"] = {"count": 0, "max_force_n": 0.0}
        self.records.append(rec)

    def _enter(self, phase: Phase) -> None:
        self.phase = phase
        self.phase_times.append((phase.value, self.t))
        self._log(force=True)

    def _step_world(self) -> None:
        record = (self.tick + 1) % self.decim == 0
        world_step(self.world, self.commands, self.contact, self.dt, record_contacts=record)
        self.tick += 1

    # -- phases ------------------------------------------------------

    def _detect(self) -> Dict[str, Pose]:
        attempts = self.cfg.pipeline.detect_retries + 1
        truth = [(p.pose(), p.geom) for p in self.world.panels]
        for _ in range(attempts):
            dets = synthetic_detect(truth, self.cam_pose, self.cam, self.noise, rng=self.rng)
            try:
                return self._match(dets)
            except PerceptionIncomplete:
                continue
        raise _TrialFailure("failed-grasp")

    def _match(self, dets) -> Dict[str, Pose]:
        """Pair patch/connector detections and assign them to roles.

        The two workspaces are separated by the y=0 plane, so the
        deprojected detection position decides the role; within a side,
        the connector closest to the patch is its pair.
        """
        located = [
            (det, depth, deproject(det.center, depth, self.cam, self.cam_pose))
            for det, depth in dets
        ]
        targets = {}
        for role in ROLES:
            side = 1.0 if role == "driving" else -1.0
            patches = [e for e in located if e[0].cls == "patch" and side * e[2][1] > 0]
            conns = [e for e in located if e[0].cls == "connector" and side * e[2][1] > 0]
            if not patches or not conns:
                raise PerceptionIncomplete(f"no detection pair on the {role} side")
            patch = patches[0]
            conn = min(conns, key=lambda e: float(np.linalg.norm(e[2][:2] - patch[2][:2])))
            targets[role] = grasp_pose_from_detections(
                patch[0], conn[0], conn[1], self.cam, self.cam_pose
            )
        return targets

    def _approach(self, targets: Dict[str, Pose]) -> None:
        pc = self.cfg.pipeline.approach
        ic = self.cfg.controllers.impedance
        params = ImpedanceParams.diagonal(ic.mass_kg, ic.damping_nspm, ic.stiffness_npm)
        refs = {}
        states = {}
        for role in ROLES:
            arm = self.arm(role)
            r0 = np.concatenate(
                [arm.pos, rotvec_from_rotation(arm.rot @ targets[role].rotation.T)]
            )
            states[role] = TaskState(r0, np.zeros(6))
            refs[role] = ImpedanceReference.hold(
                np.concatenate([targets[role].position, np.zeros(3)])
            )
        held = 0.0
        ticks = int(round(pc.timeout_s / self.dt))
        for _ in range(ticks):
            settled = True
            for role in ROLES:
                states[role] = impedance_step(
                    states[role], refs[role], np.zeros(6), params, self.dt
                )
                r = states[role].r
                pose = Pose(
                    r[:3].copy(), rotation_from_rotvec(r[3:]) @ targets[role].rotation
                )
                place_ee(self.world, self.arm_of[role], pose)
                pos_err = float(np.linalg.norm(r[:3] - refs[role].r_d[:3]))
                rot_err = float(np.linalg.norm(r[3:]))
                speed = float(np.linalg.norm(states[role].rdot))
                if pos_err > pc.settle_pos_m or speed > pc.settle_speed_mps or rot_err > 0.02:
                    settled = False
            self.commands = {}
            self._step_world()
            self._log()
            held = held + self.dt if settled else 0.0
            if held >= pc.settle_hold_s:
                return
        raise _TrialFailure("timeout")

    def _grasp(self) -> None:
        for role in ROLES:
            try:
                grasp_lock(self.world, self.arm_of[role], self.panel_of[role], self.contact)
            except GraspFailure:
                raise _TrialFailure("failed-grasp") from None
            arm = self.arm(role)
            # the z bound for the lift is the grasp-time EE height, exactly
            self.z_min[role] = float(arm.pos[2])
            self.R_A[role] = arm.rot.copy()

    def _constraint_geometry(self) -> PanelGeometry:
        """Panel geometry re-expressed in the tool frame.

        The collision model takes corner offsets relative to the
        end-effector in the EE frame; the grapple mate flips the panel
        frame about x, so the panel-frame offsets must be flipped too.
        """
        g = self.panel_geom
        mate = rot_x(math.pi)
        return PanelGeometry(
            width=g.width,
            height=g.height,
            thickness=g.thickness,
            mass=g.mass,
            grapple_offset=mate @ g.grapple_offset,
            corner_offsets=g.corner_offsets @ mate.T,
            rod_length=g.rod_length,
        )

    def _goals(self) -> Tuple[Dict[str, LiftGoal], Dict[str, LiftGoal], Dict[str, ConstraintParams]]:
        """Lift goals (straight up), assembly goals (mating line), and the
        per-arm constraint parametrization shared by both phases."""
        pc = self.cfg.pipeline
        g = self.panel_geom
        tool_geom = self._constraint_geometry()
        ee_dz = float(g.grapple_offset[2])
        ee_dy = float(g.grapple_offset[1])
        z_lift = self.cfg.world.table_height_m + pc.lift.height_m + ee_dz

        asm = pc.assembly
        y_center = {
            "yielding": asm.yielding_center_y_m,
            "driving": asm.yielding_center_y_m
            + g.height
            + g.rod_length
            + asm.insert_gap_m,
        }
        lift_goals, asm_goals, cons = {}, {}, {}
        for role in ROLES:
            arm = self.arm(role)
            R_goal = rot_x(math.pi)  # yaw zero, tool down
            aa = relative_axis_angle(self.R_A[role], R_goal)
            env = EnvironmentParams(
                b_collision=pc.walls.b_collision_m,
                y_wall=pc.walls.driving_y_wall_m
                if role == "driving"
                else pc.walls.yielding_y_wall_m,
                z_min=self.z_min[role],
                y_wall_sign=1.0 if role == "driving" else -1.0,
            )
            cons[role] = ConstraintParams(self.R_A[role], aa.axis, tool_geom, env)
            lift_goals[role] = LiftGoal(
                float(arm.pos[0]), float(arm.pos[1]), z_lift, aa.angle
            )
            z_goal = z_lift + (asm.approach_offset_z_m if role == "driving" else 0.0)
            asm_goals[role] = LiftGoal(
                asm.yielding_center_x_m, y_center[role] + ee_dy, z_goal, aa.angle
            )
        return lift_goals, asm_goals, cons

    def _nmpc_phase(
        self,
        goals: Dict[str, LiftGoal],
        cons: Dict[str, ConstraintParams],
        goal_tol: float,
        timeout_s: float,
    ) -> None:
        oc = self.cfg.controllers.ocp
        ocp_cfg = OcpConfig(
            horizon=oc.horizon_s,
            nodes=oc.nodes,
            u_lo=np.array([-oc.v_max_mps] * 3 + [-oc.yaw_rate_max_radps]),
            u_hi=np.array([oc.v_max_mps] * 3 + [oc.yaw_rate_max_radps]),
        )
        ctrls = {role: NmpcController(goals[role], cons[role], ocp_cfg) for role in ROLES}
        resolve_every = max(1, int(round(1.0 / (oc.resolve_rate_hz * self.dt))))
        bad_streak = {role: 0 for role in ROLES}
        held = 0.0
        u_world: Dict[str, np.ndarray] = {}
        ticks = int(round(timeout_s / self.dt))
        for k in range(ticks):
            if k % resolve_every == 0:
                diag = {}
                for role in ROLES:
                    s = cons[role]
                    arm = self.arm(role)
                    x = np.array(
                        [
                            arm.pos[0],
                            arm.pos[1],
                            arm.pos[2],
                            _theta_about(arm.rot, s.R_A, s.a),
                        ]
                    )
                    res = ctrls[role].step(x)
                    bad_streak[role] = 0 if res.converged else bad_streak[role] + 1
                    if bad_streak[role] >= oc.abort_after_nonconverged:
                        raise _TrialFailure("solver-abort")
                    u_world[role] = np.concatenate(
                        [res.u[:3], input_map(float(res.u[3]), s.R_A, s.a)]
                    )
                    diag[role] = {
                        "converged": bool(res.converged),
                        "iterations": int(res.iterations),
                        "kkt": float(res.kkt_residual),
                        "violation": float(res.max_violation),
                        "cost": float(res.cost),
                    }
                self.nmpc_diag = diag
            self.commands = {self.arm_of[role]: u_world[role] for role in ROLES}
            self._step_world()
            self._log()
            settled = True
            for role in ROLES:
                s = cons[role]
                arm = self.arm(role)
                x = np.array(
                    [arm.pos[0], arm.pos[1], arm.pos[2], _theta_about(arm.rot, s.R_A, s.a)]
                )
                if float(np.linalg.norm(x - goals[role].vector())) > goal_tol:
                    settled = False
            held = held + self.dt if settled else 0.0
            if held >= oc.settle_hold_s:
                return
        raise _TrialFailure("timeout")

    def _insert(self) -> None:
        pc = self.cfg.pipeline
        wcfg = self.cfg.controllers.wrench
        ic = self.cfg.controllers.impedance
        dt = self.dt
        d_name = self.arm_of["driving"]
        y_name = self.arm_of["yielding"]
        zero_sensor(self.world, d_name, self.contact)
        zero_sensor(self.world, y_name, self.contact)

        # Yielding arm: hold the lift-end pose, compliant except along x
        # and about the vertical (yaw) axis
        y_arm = self.arm("yielding")
        R_ref = y_arm.rot.copy()
        y_params = ImpedanceParams.diagonal(
            ic.mass_kg,
            ic.insert_damping_nspm,
            ic.insert_stiffness_npm,
            rigid_mask=(True, False, False, False, False, True),
        )
        y_ref = ImpedanceReference.hold(np.concatenate([y_arm.pos, np.zeros(3)]))
        y_state = TaskState(y_ref.r_d.copy(), np.zeros(6))

        cmd = WrenchCommand(
            desired=Wrench.from_vector(
                np.array([0.0, wcfg.insert_force_n, 0.0, 0.0, 0.0, 0.0]),
                frame=f"sensor_{d_name}",
            ),
            force_axes=(False, True, True, False, False, False),
            kp=np.full(6, wcfg.kp_mps_per_n),
            ki=np.full(6, wcfg.ki_mps_per_ns),
            integrator_clamp=wcfg.integrator_clamp,
            velocity_clamp=wcfg.velocity_clamp_mps,
        )
        integ = np.zeros(6)
        inserted_at: Optional[float] = None
        ticks = int(round(pc.insert.timeout_s / dt))
        for _ in range(ticks):
            measured_d = measure_wrench(self.world, d_name, self.contact)
            measured_y = measure_wrench(self.world, y_name, self.contact)
            vel, integ = force_control_step(measured_d, cmd, integ, dt)
            # sensor reports the reaction load; the impedance wants the
            # external wrench acting on the payload
            y_state = impedance_step(y_state, y_ref, -measured_y.vector(), y_params, dt)
            r = y_state.r
            # pose command lands before the dynamics step so the step's
            # contact evaluation sees the updated pose
            place_ee(
                self.world, y_name, Pose(r[:3].copy(), rotation_from_rotvec(r[3:]) @ R_ref)
            )
            self.commands = {d_name: vel}
            self._step_world()
            self._log()
            f_y = float(measured_d.force[1])
            self.peak_insert_force = max(self.peak_insert_force, abs(f_y))
            state, depths, _ = insertion_status(self.world, self.contact)
            if depths:
                self.final_depth = float(min(depths))
            if state == "inserted" and inserted_at is None:
                inserted_at = self.t
            if inserted_at is not None:
                settled = abs(f_y - wcfg.insert_force_n) <= wcfg.settle_band_n
                if settled or self.t - inserted_at > 2.0:
                    return
        if inserted_at is None:
            raise _TrialFailure("failed-insertion")

    # -- driver ------------------------------------------------------

    def run(self) -> Tuple[TrialOutcome, List[dict]]:
        try:
            self._enter(Phase.INIT)
            self._enter(Phase.DETECT)
            targets = self._detect()
            self._enter(Phase.APPROACH)
            self._approach(targets)
            self._enter(Phase.GRASP)
            self._grasp()
            lift_goals, asm_goals, cons = self._goals()
            oc = self.cfg.controllers.ocp
            self._enter(Phase.LIFT)
            self._nmpc_phase(lift_goals, cons, oc.goal_tol_lift_m, self.cfg.pipeline.lift.timeout_s)
            for role in ROLES:
                self.lift_end_pose[role] = self.arm(role).ee_pose()
            self._enter(Phase.ASSEMBLY_POSITION)
            self._nmpc_phase(
                asm_goals, cons, oc.goal_tol_assembly_m, self.cfg.pipeline.assembly.timeout_s
            )
            self._enter(Phase.INSERT)
            self._insert()
            self._enter(Phase.DONE)
            outcome = TrialOutcome(
                success=True,
                modality=None,
                phase_times=self.phase_times,
                peak_insert_force_n=self.peak_insert_force,
                final_depth_m=self.final_depth,
                seed=self.seed,
            )
        except _TrialFailure as fail:
            self._enter(Phase.FAILED)
            outcome = TrialOutcome(
                success=False,
                modality=fail.modality,
                phase_times=self.phase_times,
                peak_insert_force_n=self.peak_insert_force,
                final_depth_m=self.final_depth,
                seed=self.seed,
            )
        return outcome, self.records


def run_trial(
    cfg: ScenarioConfig, seed: Optional[int] = None, randomize: bool = False
) -> Tuple[TrialOutcome, List[dict]]:
    """Run one trial; returns the outcome and the run-log records."""
    if seed is None:
        seed = cfg.seed
    return _Trial(cfg, int(seed), randomize).run()


def summarize(outcomes: List[TrialOutcome]) -> dict:
    """Reduce trial outcomes to the success/failure table.

    Failure-modality shares are fractions of the failed trials, so they
    sum to one whenever any trial failed.
    """
    n = len(outcomes)
    successes = sum(1 for o in outcomes if o.success)
    failures = n - successes
    by_modality: Dict[str, int] = {}
    for o in outcomes:
        if not o.success:
            by_modality[o.modality] = by_modality.get(o.modality, 0) + 1
    return {
        "trials": n,
        "successes": successes,
        "success_rate": successes / n if n else 0.0,
        "failure_rate": failures / n if n else 0.0,
        "failure_modalities": {
            m: {"count": c, "share": c / failures} for m, c in sorted(by_modality.items())
        },
    }


def run_batch(
    cfg: ScenarioConfig, trials: int, seed: Optional[int] = None
) -> Tuple[dict, List[TrialOutcome]]:
    """Independent randomized trials with per-trial seeds seed+index."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if seed is None:
        seed = cfg.seed
    outcomes = []
    for i in range(trials):
        outcome, _ = run_trial(cfg, seed=int(seed) + i, randomize=True)
        outcomes.append(outcome)
    return summarize(outcomes), outcomes
