"""Driving-arm force regulation: PI wrench control with per-axis modes.

Each task axis is either force-controlled (PI on the wrench error, output
is an end-effector velocity command) or rigid (zero velocity, hold pose).
The integrator carries an anti-windup clamp and the velocity command a
magnitude clamp.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

__all__ = ["Wrench", "WrenchCommand", "force_control_step", "sensor_zero", "WrenchSensorBias"]

DIM = 6


@dataclass(frozen=True)
class Wrench:
    """6-D force/moment with its frame tag.

    Sign convention: the measured wrench is the load the tool side places
    on the wrist, i.e. minus the net external force acting on the payload.
    """

    force: np.ndarray
    moment: np.ndarray
    frame: str = "base_left"

    def __post_init__(self):
        f = np.asarray(self.force, dtype=float)
        m = np.asarray(self.moment, dtype=float)
        if f.shape != (3,) or m.shape != (3,):
            raise ValueError("force and moment must be 3-vectors")
        if not (np.all(np.isfinite(f)) and np.all(np.isfinite(m))):
            raise ValueError("wrench entries must be finite")
        object.__setattr__(self, "force", f)
        object.__setattr__(self, "moment", m)

    @staticmethod
    def zero(frame: str = "base_left") -> "Wrench":
        return Wrench(np.zeros(3), np.zeros(3), frame)

    @staticmethod
    def from_vector(v: np.ndarray, frame: str = "base_left") -> "Wrench":
        v = np.asarray(v, dtype=float)
        return Wrench(v[:3], v[3:], frame)

    def vector(self) -> np.ndarray:
        return np.concatenate([self.force, self.moment])

    def __sub__(self, other: "Wrench") -> "Wrench":
        if self.frame != other.frame:
            raise ValueError(f"frame mismatch: {self.frame} vs {other.frame}")
        return Wrench(self.force - other.force, self.moment - other.moment, self.frame)


@dataclass(frozen=True)
class WrenchCommand:
    """Per-axis control modes, desired wrench, and PI gains.

    force_axes[i] True means axis i regulates force; False means the axis
    is rigid and emits zero velocity.
    """

    desired: Wrench
    force_axes: tuple
    kp: np.ndarray = field(default_factory=lambda: np.full(DIM, 0.01))
    ki: np.ndarray = field(default_factory=lambda: np.full(DIM, 0.1))
    integrator_clamp: float = 0.5
    velocity_clamp: float = 0.1

    def __post_init__(self):
        axes = tuple(bool(b) for b in self.force_axes)
        if len(axes) != DIM:
            raise ValueError("force_axes must have 6 entries")
        if not any(axes):
            raise ValueError("at least one axis must be force-controlled")
        object.__setattr__(self, "force_axes", axes)
        for name in ("kp", "ki"):
            g = np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (DIM,)).copy()
            if np.any(g < 0.0):
                raise ValueError(f"{name} gains must be nonnegative")
            object.__setattr__(self, name, g)


def force_control_step(
    measured: Wrench,
    cmd: WrenchCommand,
    integ_state: np.ndarray,
    dt: float,
) -> Tuple[np.ndarray, np.ndarray]:
    """One PI update: returns (EE velocity command, new integrator state)."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    if measured.frame != cmd.desired.frame:
        raise ValueError(
            f"frame mismatch: measured in {measured.frame}, desired in {cmd.desired.frame}"
        )
    err = cmd.desired.vector() - measured.vector()
    active = np.asarray(cmd.force_axes)
    integ = np.asarray(integ_state, dtype=float).copy()
    integ[active] += err[active] * dt
    integ = np.clip(integ, -cmd.integrator_clamp, cmd.integrator_clamp)
    vel = np.zeros(DIM)
    vel[active] = cmd.kp[active] * err[active] + cmd.ki[active] * integ[active]
    vel = np.clip(vel, -cmd.velocity_clamp, cmd.velocity_clamp)
    integ[~active] = 0.0
    return vel, integ


@dataclass
class WrenchSensorBias:
    """Stored sensor offset; measurements are reported relative to it."""

    bias: Wrench

    def apply(self, reading: Wrench) -> Wrench:
        return reading - self.bias


def sensor_zero(reading: Wrench) -> WrenchSensorBias:
    """Capture the current reading as the new sensor zero."""
    return WrenchSensorBias(bias=reading)
