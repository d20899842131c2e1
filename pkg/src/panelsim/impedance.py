"""Cartesian impedance law, realized as commanded end-effector dynamics.

The imposed model on each compliant axis is

    M (r'' - r_d'') + D (r' - r_d') + K (r - r_d) = f_e

Axes flagged rigid track the reference exactly: error and error rate are
pinned to zero no matter what wrench is applied, which is the controller's
encoding of infinite stiffness.

Stepping uses the exact zero-order-hold discretization of the linear error
dynamics (the wrench is held constant over a step), so integration error
is at rounding level for constant wrenches and references.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

__all__ = ["ImpedanceParams", "TaskState", "ImpedanceReference", "impedance_accel", "impedance_step"]

TASK_DIM = 6


def _check_spd(name: str, A: np.ndarray, strict: bool) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.shape != (TASK_DIM, TASK_DIM):
        raise ValueError(f"{name} must be {TASK_DIM}x{TASK_DIM}")
    if not np.allclose(A, A.T, atol=1e-9):
        raise ValueError(f"{name} must be symmetric")
    eigs = np.linalg.eigvalsh(A)
    if strict and eigs[0] <= 0.0:
        raise ValueError(f"{name} must be positive definite")
    if not strict and eigs[0] < -1e-12:
        raise ValueError(f"{name} must be positive semidefinite")
    return A


@dataclass(frozen=True)
class ImpedanceParams:
    """Desired mass, damping, stiffness matrices plus the rigidity mask."""

    M: np.ndarray
    D: np.ndarray
    K: np.ndarray
    rigid_mask: tuple = (False,) * TASK_DIM
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "M", _check_spd("M", self.M, strict=True))
        object.__setattr__(self, "D", _check_spd("D", self.D, strict=False))
        object.__setattr__(self, "K", _check_spd("K", self.K, strict=True))
        mask = tuple(bool(b) for b in self.rigid_mask)
        if len(mask) != TASK_DIM:
            raise ValueError("rigid_mask must have 6 entries")
        object.__setattr__(self, "rigid_mask", mask)
        object.__setattr__(self, "compliant", np.flatnonzero(~np.asarray(mask)))

    @staticmethod
    def diagonal(m, d, k, rigid_mask=(False,) * TASK_DIM) -> "ImpedanceParams":
        as_diag = lambda v: np.diag(np.broadcast_to(np.asarray(v, float), (TASK_DIM,)).copy())
        return ImpedanceParams(as_diag(m), as_diag(d), as_diag(k), rigid_mask)


@dataclass(frozen=True)
class TaskState:
    """Task coordinates (position + orientation error coords) and velocity."""

    r: np.ndarray
    rdot: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        rdot = np.asarray(self.rdot, dtype=float)
        if r.shape != (TASK_DIM,) or rdot.shape != (TASK_DIM,):
            raise ValueError("task state must be a pair of 6-vectors")
        if not (np.all(np.isfinite(r)) and np.all(np.isfinite(rdot))):
            raise ValueError("task state entries must be finite")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "rdot", rdot)


@dataclass(frozen=True)
class ImpedanceReference:
    """Desired task trajectory sample: pose, velocity, acceleration."""

    r_d: np.ndarray
    rdot_d: np.ndarray = field(default_factory=lambda: np.zeros(TASK_DIM))
    rddot_d: np.ndarray = field(default_factory=lambda: np.zeros(TASK_DIM))

    def __post_init__(self):
        for name in ("r_d", "rdot_d", "rddot_d"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (TASK_DIM,) or not np.all(np.isfinite(v)):
                raise ValueError(f"{name} must be a finite 6-vector")
            object.__setattr__(self, name, v)

    @staticmethod
    def hold(r_d: np.ndarray) -> "ImpedanceReference":
        return ImpedanceReference(np.asarray(r_d, dtype=float))


def impedance_accel(
    state: TaskState,
    ref: ImpedanceReference,
    f_e: np.ndarray,
    params: ImpedanceParams,
) -> np.ndarray:
    """Task acceleration commanded by the impedance model.

    Compliant axes follow M^-1 (f_e - D de - K e) around the reference
    acceleration; rigid axes return the reference acceleration itself.
    """
    f_e = np.asarray(f_e, dtype=float)
    e = state.r - ref.r_d
    edot = state.rdot - ref.rdot_d
    c = params.compliant
    accel = ref.rddot_d.copy()
    if c.size:
        Mc = params.M[np.ix_(c, c)]
        rhs = f_e[c] - params.D[np.ix_(c, c)] @ edot[c] - params.K[np.ix_(c, c)] @ e[c]
        accel[c] += np.linalg.solve(Mc, rhs)
    return accel


def _discrete_maps(params: ImpedanceParams, dt: float):
    """Exact ZOH transition of the compliant error dynamics, cached per dt."""
    key = float(dt)
    hit = params._cache.get(key)
    if hit is not None:
        return hit
    c = params.compliant
    n = c.size
    Minv = np.linalg.inv(params.M[np.ix_(c, c)])
    A = np.zeros((2 * n, 2 * n))
    A[:n, n:] = np.eye(n)
    A[n:, :n] = -Minv @ params.K[np.ix_(c, c)]
    A[n:, n:] = -Minv @ params.D[np.ix_(c, c)]
    B = np.vstack([np.zeros((n, n)), Minv])
    Ad = expm(A * dt)
    Bd = np.linalg.solve(A, (Ad - np.eye(2 * n)) @ B)
    params._cache[key] = (Ad, Bd)
    return Ad, Bd


def impedance_step(
    state: TaskState,
    ref: ImpedanceReference,
    f_e: np.ndarray,
    params: ImpedanceParams,
    dt: float,
) -> TaskState:
    """Advance the commanded task state by one step of length dt.

    The wrench is held constant over the step.  Rigid axes copy the
    reference exactly.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    f_e = np.asarray(f_e, dtype=float)
    # reference advanced along its own velocity/acceleration
    r_d_next = ref.r_d + ref.rdot_d * dt + 0.5 * ref.rddot_d * dt * dt
    rdot_d_next = ref.rdot_d + ref.rddot_d * dt
    r_next = r_d_next.copy()
    rdot_next = rdot_d_next.copy()
    c = params.compliant
    if c.size:
        n = c.size
        Ad, Bd = _discrete_maps(params, dt)
        xi = np.concatenate([(state.r - ref.r_d)[c], (state.rdot - ref.rdot_d)[c]])
        xi = Ad @ xi + Bd @ f_e[c]
        r_next[c] += xi[:n]
        rdot_next[c] += xi[n:]
    return TaskState(r_next, rdot_next)
