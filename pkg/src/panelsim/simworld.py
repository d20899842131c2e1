"""Deterministic physics-lite world for the dual-arm assembly task.

Two velocity-commanded end-effectors, rigidly attached payloads, penalty
contact (spring-damper normal force, Coulomb-capped viscous friction)
between panels and the table, and a rod-into-hole model with a chamfered
capture region.  Free panels move quasi-statically (overdamped), so
penetrations decay instead of oscillating, which is the regime the
interaction controllers are designed against.

The world is stepped by a single owner; state objects are mutated in
place for speed and the step functions return the same instance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .geometry import Pose, rot_x, rotation_from_rotvec
from .scene import PanelGeometry
from .wrench_control import Wrench

__all__ = [
    "GraspFailure",
    "ContactParams",
    "TableParams",
    "ArmState",
    "PanelState",
    "ContactRecord",
    "WorldState",
    "ideal_grasp_pose",
    "world_step",
    "place_ee",
    "grasp_lock",
    "measure_wrench",
    "zero_sensor",
    "insertion_status",
    "insertion_check",
]

_GRAVITY_DIR = np.array([0.0, 0.0, -1.0])


class GraspFailure(RuntimeError):
    """The adapter missed the guide capture tolerance; the trial failed."""


@dataclass
class ContactParams:
    """Penalty contact and mating-geometry parameters."""

    k_e: float = 2000.0
    c_e: float = 50.0
    mu: float = 0.3
    capture_radius: float = 0.010
    capture_angle: float = 0.10
    hole_clearance: float = 0.001
    chamfer_width: float = 0.008
    depth_threshold: float = 0.010

    def __post_init__(self):
        if self.k_e <= 0.0:
            raise ValueError("contact stiffness must be positive")
        if self.c_e < 0.0 or self.mu < 0.0:
            raise ValueError("damping and friction must be nonnegative")
        if self.chamfer_width <= self.hole_clearance:
            raise ValueError("chamfer_width must exceed hole_clearance")


@dataclass
class TableParams:
    height: float = 0.0
    x_extent: Tuple[float, float] = (-1.0, 2.0)
    y_extent: Tuple[float, float] = (-1.5, 1.5)


@dataclass
class ArmState:
    """One end-effector: pose, realized twist, grasp bookkeeping.

    The twist tracks the commanded twist through a first-order lag; the
    sensor bias is the raw reading frozen by zero_sensor.
    """

    pos: np.ndarray
    rot: np.ndarray
    twist: np.ndarray = field(default_factory=lambda: np.zeros(6))
    grasped: Optional[int] = None
    bias: np.ndarray = field(default_factory=lambda: np.zeros(6))

    def ee_pose(self) -> Pose:
        return Pose(self.pos.copy(), self.rot.copy())


@dataclass
class PanelState:
    pos: np.ndarray
    rot: np.ndarray
    geom: PanelGeometry
    vel: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def pose(self) -> Pose:
        return Pose(self.pos.copy(), self.rot.copy())


@dataclass
class ContactRecord:
    kind: str  # "table", "rod", "face"
    panel: int
    point: np.ndarray
    normal: np.ndarray
    penetration: float
    force: np.ndarray  # on the named panel, world frame


@dataclass
class WorldState:
    time: float
    arms: Dict[str, ArmState]
    panels: List[PanelState]
    table: TableParams = field(default_factory=TableParams)
    gravity: float = 9.81
    ee_lag_tau: float = 0.05
    contacts: List[ContactRecord] = field(default_factory=list)
    # (time, F, M) from the most recent step; lets wrench reads reuse the
    # step's contact evaluation instead of recomputing it
    force_cache: Optional[Tuple[float, np.ndarray, np.ndarray]] = field(
        default=None, repr=False, compare=False
    )


def ideal_grasp_pose(panel: PanelState) -> Pose:
    """End-effector pose that mates the grapple adapter exactly.

    Tool z points down into the plate; position is the grapple point on
    the top surface.
    """
    rot = panel.rot @ rot_x(math.pi)
    pos = panel.pos + panel.rot @ panel.geom.grapple_offset
    return Pose(pos, rot)


def _angle_between(Ra: np.ndarray, Rb: np.ndarray) -> float:
    c = (np.trace(Ra.T @ Rb) - 1.0) / 2.0
    return math.acos(min(1.0, max(-1.0, c)))


def _panel_point_velocity(w: WorldState, idx: int, point: np.ndarray) -> np.ndarray:
    """World-frame velocity of a material point on panel idx.

    Free panels count as stationary here: their overdamped drag already
    dissipates energy, and feeding their quasi-static velocity back into
    the contact damping term would destabilize the equilibrium.
    """
    for arm in w.arms.values():
        if arm.grasped == idx:
            v, omega = arm.twist[:3], arm.twist[3:]
            return v + _cross(omega, point - arm.pos)
    return np.zeros(3)


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # np.cross carries moveaxis overhead that dominates at this size
    ax, ay, az = a[..., 0], a[..., 1], a[..., 2]
    bx, by, bz = b[..., 0], b[..., 1], b[..., 2]
    return np.stack([ay * bz - az * by, az * bx - ax * bz, ax * by - ay * bx], axis=-1)


_BOTTOM_CACHE: Dict[Tuple[float, float, float], np.ndarray] = {}


def _bottom_corners(g: PanelGeometry) -> np.ndarray:
    key = (g.width, g.height, g.thickness)
    cached = _BOTTOM_CACHE.get(key)
    if cached is None:
        hw, hh, ht = g.width / 2.0, g.height / 2.0, g.thickness / 2.0
        cached = np.array(
            [
                [hw, hh, -ht],
                [-hw, hh, -ht],
                [-hw, -hh, -ht],
                [hw, -hh, -ht],
            ]
        )
        _BOTTOM_CACHE[key] = cached
    return cached


def _evaluate_contacts(w: WorldState, contact: ContactParams, record: bool = True):
    """Forces on every panel from table and panel-panel interactions.

    Returns (F, M, records): total contact force per panel and total
    moment about each panel's center, both (n, 3) world-frame arrays.
    Every panel-panel force has its Newton pair applied to the other
    panel, so the pair sums cancel exactly.
    """
    n = len(w.panels)
    F = np.zeros((n, 3))
    M = np.zeros((n, 3))
    records: List[ContactRecord] = []
    owner: List[Optional[ArmState]] = [None] * n
    for arm in w.arms.values():
        if arm.grasped is not None:
            owner[arm.grasped] = arm
    up = np.array([0.0, 0.0, 1.0])

    for i, panel in enumerate(w.panels):
        corners = panel.pos + _bottom_corners(panel.geom) @ panel.rot.T
        pen = w.table.height - corners[:, 2]
        if pen.max() <= 0.0:
            continue
        arm = owner[i]
        if arm is not None:
            vels = arm.twist[:3] + _cross(arm.twist[3:], corners - arm.pos)
        else:
            vels = np.zeros((4, 3))
        fn = contact.k_e * pen - contact.c_e * vels[:, 2]
        active = (pen > 0.0) & (fn > 0.0)
        fn = np.where(active, fn, 0.0)
        forces = fn[:, None] * up
        speed_t = np.hypot(vels[:, 0], vels[:, 1])
        slipping = active & (speed_t > 1e-12)
        if np.any(slipping):
            f_t = np.minimum(contact.c_e * speed_t, contact.mu * fn)
            scale = np.where(slipping, f_t / np.where(slipping, speed_t, 1.0), 0.0)
            forces[:, 0] -= scale * vels[:, 0]
            forces[:, 1] -= scale * vels[:, 1]
        F[i] += forces.sum(axis=0)
        M[i] += _cross(corners - panel.pos, forces).sum(axis=0)
        if record:
            for c in np.nonzero(active)[0]:
                records.append(
                    ContactRecord("table", i, corners[c], up.copy(), pen[c], forces[c])
                )

    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            pi, pj = w.panels[i], w.panels[j]
            # proximity gate: rods and faces can only interact edge to edge
            gap = pi.pos - pj.pos
            reach = 0.55 * (pi.geom.height + pj.geom.height)
            if gap @ gap > reach * reach:
                continue
            _panel_pair_contacts(w, contact, i, j, F, M, records if record else None)

    return F, M, records


def _panel_pair_contacts(w, contact, i, j, F, M, records):
    """Rod-into-hole and face-seating forces of panel i against panel j."""
    pi, pj = w.panels[i], w.panels[j]
    gi, gj = pi.geom, pj.geom
    axis_out = pj.rot[:, 1]  # hole opening direction, world frame

    def apply(point, force, kind, pen):
        F[i] += force
        M[i] += _cross(point - pi.pos, force)
        F[j] -= force
        M[j] -= _cross(point - pj.pos, force)
        if records is not None:
            records.append(ContactRecord(kind, i, point, axis_out.copy(), pen, force))

    for rod_idx, hole_idx, tip, depth, lat_err, lat_dir in _rods_into_holes(pi, pj):
        if depth < 0.0:
            continue
        v_tip = _panel_point_velocity(w, i, tip)
        v_hole = _panel_point_velocity(w, j, tip)
        v_ax = float((v_tip - v_hole) @ (-axis_out))
        if lat_err > contact.chamfer_width:
            fn = contact.k_e * depth + contact.c_e * v_ax
            if fn > 0.0:
                apply(tip, fn * axis_out, "rod", depth)
        elif lat_err > contact.hole_clearance:
            # chamfer: partial axial resistance plus lateral centering
            frac = (lat_err - contact.hole_clearance) / (
                contact.chamfer_width - contact.hole_clearance
            )
            fn = max(0.0, frac * contact.k_e * depth + contact.c_e * v_ax)
            center = contact.k_e * (lat_err - contact.hole_clearance)
            force = fn * axis_out - center * lat_dir
            apply(tip, force, "rod", depth * frac)

    # face seating: rod-base edge of one panel against the holed face of
    # the other; only reachable once the rods are essentially inserted
    face_y = gj.height / 2.0
    bases = pi.pos + gi.rod_positions @ pi.rot.T
    q = (bases - pj.pos) @ pj.rot
    pen = face_y - q[:, 1]
    hit = (
        (pen > 0.0)
        & (pen <= gi.rod_length + 0.005)
        & (np.abs(q[:, 0]) <= gj.width / 2.0)
        & (np.abs(q[:, 2]) <= gj.thickness)
    )
    for b in np.nonzero(hit)[0]:
        base = bases[b]
        v_rel = _panel_point_velocity(w, i, base) - _panel_point_velocity(w, j, base)
        fn = contact.k_e * pen[b] + contact.c_e * float(v_rel @ axis_out)
        if fn > 0.0:
            apply(base, fn * axis_out, "face", float(pen[b]))


_TIP_CACHE: Dict[Tuple[bytes, float], np.ndarray] = {}


def _rod_tips_local(g: PanelGeometry) -> np.ndarray:
    key = (g.rod_positions.tobytes(), g.rod_length)
    tips = _TIP_CACHE.get(key)
    if tips is None:
        tips = g.rod_positions + np.array([0.0, -g.rod_length, 0.0])
        _TIP_CACHE[key] = tips
    return tips


def _rods_into_holes(pi: PanelState, pj: PanelState):
    """Geometry of panel i's rods against their nearest holes on panel j.

    Yields (rod_idx, hole_idx, tip_world, depth, lateral_error,
    lateral_dir_world); depth is positive once the tip has passed the
    hole mouth plane.
    """
    gi, gj = pi.geom, pj.geom
    if np.size(gi.rod_positions) == 0 or np.size(gj.hole_positions) == 0:
        return
    tips = pi.pos + _rod_tips_local(gi) @ pi.rot.T
    q = (tips - pj.pos) @ pj.rot  # hole-panel frame, one row per rod
    holes = gj.hole_positions
    dx = q[:, 0, None] - holes[None, :, 0]
    dz = q[:, 2, None] - holes[None, :, 2]
    lat2 = dx * dx + dz * dz
    nearest = np.argmin(lat2, axis=1)
    for rod_idx in range(len(tips)):
        hole_idx = int(nearest[rod_idx])
        depth = float(holes[hole_idx, 1] - q[rod_idx, 1])
        # a rod can only occupy a hole over its own length (plus
        # face-seating overlap); anything deeper is plate overlap,
        # not insertion, and belongs to the face contact
        if depth > gi.rod_length + 0.01:
            continue
        lat = math.sqrt(float(lat2[rod_idx, hole_idx]))
        if lat > 1e-12:
            lat_dir = pj.rot @ np.array(
                [dx[rod_idx, hole_idx] / lat, 0.0, dz[rod_idx, hole_idx] / lat]
            )
        else:
            lat_dir = np.zeros(3)
        yield rod_idx, hole_idx, tips[rod_idx], depth, lat, lat_dir


def _rod_hole_pairs(w: WorldState):
    """All-pairs wrapper over _rods_into_holes with panel indices."""
    n = len(w.panels)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            for rod_idx, hole_idx, tip, depth, lat, lat_dir in _rods_into_holes(
                w.panels[i], w.panels[j]
            ):
                yield i, j, rod_idx, hole_idx, tip, depth, lat, lat_dir


def world_step(
    w: WorldState,
    commands: Dict[str, np.ndarray],
    contact: ContactParams,
    dt: float,
    record_contacts: bool = True,
) -> WorldState:
    """Advance the world one tick under per-arm twist commands.

    The realized twist follows the command through a first-order lag
    (time constant ee_lag_tau; zero means an ideal velocity source),
    locked panels follow their arm rigidly, and free panels move
    quasi-statically under contact and gravity.  Overlaps produce forces,
    never errors.  Pass record_contacts=False to skip building the
    per-contact record list on ticks that will not be logged.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    for name, arm in w.arms.items():
        cmd = np.asarray(commands.get(name, np.zeros(6)), dtype=float)
        if w.ee_lag_tau > 0.0:
            decay = 1.0 - math.exp(-dt / w.ee_lag_tau)
            arm.twist = arm.twist + decay * (cmd - arm.twist)
        else:
            arm.twist = cmd.copy()
        arm.pos = arm.pos + arm.twist[:3] * dt
        omega = arm.twist[3:]
        if omega @ omega > 0.0:
            arm.rot = rotation_from_rotvec(omega * dt) @ arm.rot
        if arm.grasped is not None:
            _follow_arm(w.panels[arm.grasped], arm)

    F, M, records = _evaluate_contacts(w, contact, record=record_contacts)
    locked = {a.grasped for a in w.arms.values() if a.grasped is not None}
    for idx, panel in enumerate(w.panels):
        if idx in locked:
            panel.vel = np.zeros(3)
            continue
        total = F[idx] + np.array([0.0, 0.0, -panel.geom.mass * w.gravity])
        panel.vel = total / contact.c_e if contact.c_e > 0.0 else np.zeros(3)
        panel.pos = panel.pos + panel.vel * dt

    w.contacts = records
    w.time += dt
    w.force_cache = (w.time, F, M)
    return w


_MATE = rot_x(math.pi)


def _follow_arm(panel: PanelState, arm: ArmState) -> None:
    # guides seat the adapter, so the mate transform is ideal and exact
    panel.rot = arm.rot @ _MATE
    panel.pos = arm.pos - panel.rot @ panel.geom.grapple_offset
    panel.vel = np.zeros(3)


def place_ee(w: WorldState, arm_name: str, pose: Pose) -> WorldState:
    """Teleport one end-effector to a pose with zero twist.

    Used by the pose-tracking phases, where the commanded pose is exact
    by construction; the locked panel follows rigidly.
    """
    arm = w.arms[arm_name]
    arm.pos = np.asarray(pose.position, dtype=float).copy()
    arm.rot = np.asarray(pose.rotation, dtype=float).copy()
    arm.twist = np.zeros(6)
    if arm.grasped is not None:
        _follow_arm(w.panels[arm.grasped], arm)
    w.force_cache = None
    return w


def grasp_lock(
    w: WorldState, arm_name: str, panel_idx: int, contact: ContactParams
) -> WorldState:
    """Lock the adapter onto a panel, seating it at the ideal mate.

    The end-effector must be within the guide capture tolerance of the
    ideal grasp pose; beyond it the mechanism closes on nothing and the
    trial records a grasp failure.
    """
    arm = w.arms[arm_name]
    panel = w.panels[panel_idx]
    ideal = ideal_grasp_pose(panel)
    pos_err = float(np.linalg.norm(arm.pos - ideal.position))
    ang_err = _angle_between(arm.rot, ideal.rotation)
    if pos_err > contact.capture_radius or ang_err > contact.capture_angle:
        raise GraspFailure(
            f"adapter missed capture: {1e3 * pos_err:.1f} mm, {ang_err:.3f} rad"
        )
    arm.grasped = panel_idx
    _follow_arm(panel, arm)
    w.force_cache = None
    return w


def measure_wrench(w: WorldState, arm_name: str, contact: ContactParams) -> Wrench:
    """Synthesized F/T reading at one wrist, bias-compensated.

    Sign convention: the sensor reports the load the tool side places on
    the wrist, i.e. minus the net external force on the payload; moments
    are taken about the wrist point.  Axes are base-aligned (the reading
    is software-rotated, as with a gravity-aligned sensor mount).
    """
    arm = w.arms[arm_name]
    frame = f"sensor_{arm_name}"
    raw = np.zeros(6)
    if arm.grasped is not None:
        panel = w.panels[arm.grasped]
        if w.force_cache is not None and w.force_cache[0] == w.time:
            _, F, M = w.force_cache
        else:
            F, M, _ = _evaluate_contacts(w, contact, record=False)
            w.force_cache = (w.time, F, M)
        grav = np.array([0.0, 0.0, -panel.geom.mass * w.gravity])
        f_net = grav + F[arm.grasped]
        # contact moments are tracked about the panel center; shift them
        # to the wrist along with the gravity load
        m_net = _cross(panel.pos - arm.pos, grav + F[arm.grasped]) + M[arm.grasped]
        raw = -np.concatenate([f_net, m_net])
    return Wrench.from_vector(raw - arm.bias, frame=frame)


def zero_sensor(w: WorldState, arm_name: str, contact: ContactParams) -> WorldState:
    """Freeze the current raw reading as the sensor bias."""
    arm = w.arms[arm_name]
    arm.bias = np.zeros(6)
    arm.bias = measure_wrench(w, arm_name, contact).vector()
    return w


def insertion_status(w: WorldState, contact: ContactParams):
    """Per-rod mating geometry of the best-matched panel pair.

    Returns (state, depths, lateral_errors) with state one of
    "not-aligned", "aligned", "inserted".
    """
    by_pair: Dict[Tuple[int, int], List[Tuple[float, float]]] = {}
    for i, j, rod_idx, hole_idx, tip, depth, lat, lat_dir in _rod_hole_pairs(w):
        by_pair.setdefault((i, j), []).append((depth, lat))
    best = ("not-aligned", [], [])
    rank = {"not-aligned": 0, "aligned": 1, "inserted": 2}
    for pair, rods in by_pair.items():
        depths = [d for d, _ in rods]
        lats = [e for _, e in rods]
        if all(
            d >= contact.depth_threshold and e <= contact.hole_clearance
            for d, e in rods
        ):
            state = "inserted"
        elif all(
            e <= contact.chamfer_width and d >= -contact.chamfer_width
            for d, e in rods
        ):
            state = "aligned"
        else:
            state = "not-aligned"
        if rank[state] > rank[best[0]]:
            best = (state, depths, lats)
    return best


def insertion_check(w: WorldState, contact: ContactParams) -> str:
    """Connector state of the panel pair: not-aligned, aligned, inserted."""
    return insertion_status(w, contact)[0]
