"""Lift-phase NMPC: transcription and solution of the collision-aware OCP.

The plant is the four-channel velocity integrator over (x, y, z, theta);
with piecewise-constant inputs its discretization x_{k+1} = x_k + h u_k is
exact, so the transcription introduces no integration error.  The shooting
equalities are eliminated exactly by that rollout, leaving the interval
inputs as decision variables: the cost becomes an exact quadratic and the
corner-margin constraints at the nodes are nonlinear only through theta.

The NLP is solved by sequential quadratic programming with the exact
Hessian: each iteration linearizes the corner maps around the current
theta trajectory and solves the resulting box-and-inequality QP with
OSQP.  Because the cost is exactly quadratic, the loop typically
converges in two or three iterations.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import osqp
import scipy.linalg
import scipy.sparse as sp

from .scene import ConstraintParams, constraint_eval

__all__ = [
    "LiftGoal",
    "OcpConfig",
    "NmpcResult",
    "TranscribedOcp",
    "build_ocp",
    "nmpc_step",
    "input_map",
    "NmpcController",
]

NX = 4  # (x, y, z, theta)
NC = 12  # margins per node


@dataclass(frozen=True)
class LiftGoal:
    """Lift target: desired position plus the relative rotation angle."""

    x_d: float
    y_d: float
    z_d: float
    theta_ab: float

    def vector(self) -> np.ndarray:
        return np.array([self.x_d, self.y_d, self.z_d, self.theta_ab])


def _check_weight(name, W, strict):
    W = np.asarray(W, dtype=float)
    if W.shape != (NX, NX):
        raise ValueError(f"{name} must be {NX}x{NX}")
    if not np.allclose(W, W.T, atol=1e-9):
        raise ValueError(f"{name} must be symmetric")
    eigs = np.linalg.eigvalsh(W)
    if strict and eigs[0] <= 0.0:
        raise ValueError(f"{name} must be positive definite")
    if not strict and eigs[0] < -1e-12:
        raise ValueError(f"{name} must be positive semidefinite")
    return W


@dataclass(frozen=True)
class OcpConfig:
    horizon: float = 2.0
    nodes: int = 20
    Q: np.ndarray = field(default_factory=lambda: np.diag([10.0, 10.0, 10.0, 5.0]))
    R: np.ndarray = field(default_factory=lambda: np.eye(4))
    W_e: np.ndarray = field(default_factory=lambda: np.diag([100.0, 100.0, 100.0, 50.0]))
    u_lo: np.ndarray = field(default_factory=lambda: np.array([-0.1, -0.1, -0.1, -0.3]))
    u_hi: np.ndarray = field(default_factory=lambda: np.array([0.1, 0.1, 0.1, 0.3]))
    kkt_tol: float = 1e-8
    max_iter: int = 30  # outer SQP iterations

    def __post_init__(self):
        if self.horizon <= 0.0:
            raise ValueError("horizon must be positive")
        if self.nodes < 2:
            raise ValueError("need at least two nodes")
        object.__setattr__(self, "Q", _check_weight("Q", self.Q, strict=False))
        object.__setattr__(self, "R", _check_weight("R", self.R, strict=True))
        object.__setattr__(self, "W_e", _check_weight("W_e", self.W_e, strict=False))
        lo = np.asarray(self.u_lo, dtype=float)
        hi = np.asarray(self.u_hi, dtype=float)
        if lo.shape != (NX,) or hi.shape != (NX,) or np.any(lo >= hi):
            raise ValueError("input bounds must satisfy u_lo < u_hi elementwise")
        object.__setattr__(self, "u_lo", lo)
        object.__setattr__(self, "u_hi", hi)


@dataclass
class NmpcResult:
    u: np.ndarray  # first input of the optimal sequence
    states: np.ndarray  # predicted node states, (N+1, 4)
    inputs: np.ndarray  # input sequence, (N, 4)
    cost: float
    converged: bool
    iterations: int
    kkt_residual: float
    max_violation: float
    solve_time: float


class TranscribedOcp:
    """Condensed transcription of the lift OCP over N shooting intervals.

    Margins are imposed at nodes 1..N: the initial state is data, not a
    decision variable, so a start sitting on a bound, which the
    grasp-time z_min rule produces by construction, cannot make the
    program infeasible.  Dropping the node-0 rows is exactly the
    one-node slack relaxation.
    """

    def __init__(self, x0: np.ndarray, goal: LiftGoal, s: ConstraintParams, cfg: OcpConfig):
        s.require_z_min()
        self.x0 = np.asarray(x0, dtype=float)
        self.goal = goal.vector()
        self.s = s
        self.cfg = cfg
        N = cfg.nodes
        self.N = N
        self.h = cfg.horizon / N
        self.nu = NX * N
        self.infeasible_start = bool(np.min(constraint_eval(self.x0, s)) < -1e-9)

        # corner offsets relative to the end-effector, and the lift-axis skew
        self._corners = s.panel.corner_offsets - s.panel.grapple_offset
        a = s.a
        self._skew = np.array(
            [[0.0, -a[2], a[1]], [a[2], 0.0, -a[0]], [-a[1], a[0], 0.0]]
        )
        self._K2 = self._skew @ self._skew
        self._signs = np.array([1.0, s.env.y_wall_sign, 1.0])
        self._bounds_vec = np.array(
            [s.env.b_collision, s.env.y_wall, s.env.z_min]
        )

        # exact quadratic cost in U: J = 1/2 U^T H U + g^T U + const
        h = self.h
        Wk = [h * cfg.Q] * (N - 1) + [np.asarray(cfg.W_e)]
        suffix = np.zeros((N + 1, NX, NX))
        for m in range(N - 1, -1, -1):
            suffix[m] = suffix[m + 1] + Wk[m]  # suffix[m] = sum_{k=m+1..N} W_k
        H = np.zeros((self.nu, self.nu))
        for i in range(N):
            for j in range(N):
                blk = 2.0 * h * h * suffix[max(i, j)]
                if i == j:
                    blk = blk + 2.0 * h * cfg.R
                H[NX * i:NX * (i + 1), NX * j:NX * (j + 1)] = blk
        self.H = H
        d = self.x0 - self.goal
        self.g = np.concatenate([2.0 * h * (suffix[i] @ d) for i in range(N)])
        self._dep = np.tril(np.ones((N, N)))  # node k=i+1 depends on u_j, j<=i
        self._chol = scipy.linalg.cho_factor(self.H)

    def newton_step(self, q: np.ndarray) -> np.ndarray:
        """Unconstrained minimizer of the quadratic model, p = -H^{-1} q."""
        return -scipy.linalg.cho_solve(self._chol, q)

    # -- state reconstruction -------------------------------------------
    def rollout(self, U: np.ndarray) -> np.ndarray:
        """Exact integration of the velocity integrator under inputs U."""
        U = U.reshape(self.N, NX)
        X = np.empty((self.N + 1, NX))
        X[0] = self.x0
        np.cumsum(U * self.h, axis=0, out=X[1:])
        X[1:] += self.x0
        return X

    def objective(self, U: np.ndarray) -> float:
        X = self.rollout(U)
        U = U.reshape(self.N, NX)
        dx = X - self.goal
        stage = np.einsum("ki,ij,kj->", dx[:-1], self.cfg.Q, dx[:-1])
        effort = np.einsum("ki,ij,kj->", U, self.cfg.R, U)
        return self.h * (stage + effort) + dx[-1] @ self.cfg.W_e @ dx[-1]

    def _rotations(self, thetas: np.ndarray) -> np.ndarray:
        ct, st = np.cos(thetas), np.sin(thetas)
        return (
            np.eye(3)[None]
            + st[:, None, None] * self._skew[None]
            + (1.0 - ct)[:, None, None] * self._K2[None]
        )

    def margins(self, U: np.ndarray) -> np.ndarray:
        """Corner margins at nodes 1..N, node-major, scene ordering."""
        X = self.rollout(U)
        Rm = self._rotations(X[1:, 3])
        V = X[1:, None, :3] + np.einsum("kab,cb->kca", self.s.R_A @ Rm, self._corners)
        m = self._signs[None, None, :] * (V - self._bounds_vec[None, None, :])
        # (node, corner, axis) -> (node, axis, corner) to match scene order
        return np.transpose(m, (0, 2, 1)).reshape(-1)

    def margins_jac(self, U: np.ndarray) -> np.ndarray:
        X = self.rollout(U)
        N, h = self.N, self.h
        Rm = self._rotations(X[1:, 3])
        dv = np.einsum("kab,cb->kca", self.s.R_A @ self._skew @ Rm, self._corners)
        J = np.zeros((N, 3, 4, N, NX))
        for axis in range(3):
            sgn = self._signs[axis]
            J[:, axis, :, :, axis] = sgn * h * self._dep[:, None, :]
            J[:, axis, :, :, 3] = sgn * h * self._dep[:, None, :] * dv[:, :, axis][:, :, None]
        return J.reshape(NC * N, self.nu)

    def node_margins(self, xk: np.ndarray) -> np.ndarray:
        """Single-node margins through the scene module (reference path)."""
        return constraint_eval(xk, self.s)


def build_ocp(x0, goal: LiftGoal, s: ConstraintParams, cfg: OcpConfig) -> TranscribedOcp:
    """Transcribe the lift OCP at the given initial state."""
    return TranscribedOcp(np.asarray(x0, dtype=float), goal, s, cfg)


_SLACK_PENALTY = 1e3  # dominates the margin duals without wrecking scaling

_OSQP_SETTINGS = dict(
    verbose=False,
    eps_abs=1e-5,
    eps_rel=1e-5,
    max_iter=20000,
    polishing=True,
)


def _solve_qp(H_csc, q, A_dense, lo, hi):
    """Solve one QP subproblem to high accuracy.

    The loose ADMM tolerance only locates the active set; the direct
    polish solve on that set gives a machine-precision solution.  If
    polishing fails the problem is re-solved tightly.  An infeasible
    linearization falls back to an elastic subproblem whose step reduces
    the worst violation instead of returning a certificate.
    """
    A = sp.csc_matrix(A_dense)
    prob = osqp.OSQP()
    prob.setup(H_csc, q, A, lo, hi, **_OSQP_SETTINGS)
    res = prob.solve(raise_error=False)
    if res.info.status_val == 3:  # primal infeasible
        return _solve_qp_elastic(H_csc, q, A_dense, lo, hi)
    if res.info.status_val not in (1, 2) or res.info.status_polish != 1:
        prob = osqp.OSQP()
        tight = dict(_OSQP_SETTINGS, eps_abs=1e-9, eps_rel=1e-9)
        prob.setup(H_csc, q, A, lo, hi, **tight)
        res = prob.solve(raise_error=False)
        if res.info.status_val == 3:
            return _solve_qp_elastic(H_csc, q, A_dense, lo, hi)
        ok = res.x is not None and np.all(np.isfinite(res.x))
        if not ok:
            raise RuntimeError(f"QP subproblem failed: {res.info.status}")
        # a degenerate subproblem may stall on the dual residual; the best
        # iterate is still a usable step, and the outer KKT check decides
    return res.x, res.y


def _solve_qp_elastic(H_csc, q, A_dense, lo, hi):
    """Restoration subproblem: shared nonnegative slack on the margin rows.

    The linear slack penalty dominates the margin duals, so whenever the
    plain subproblem is feasible the elastic one keeps the slack at zero;
    it only activates to hand the line search a violation-reducing step.
    """
    n = q.shape[0]
    n_m = A_dense.shape[0] - n  # margin rows precede the box rows
    P = sp.block_diag([H_csc, sp.csc_matrix((1, 1))], format="csc")
    slack_col = np.concatenate([np.ones(n_m), np.zeros(n)])
    A = sp.csc_matrix(
        np.vstack(
            [
                np.hstack([A_dense, slack_col[:, None]]),
                np.concatenate([np.zeros(n), [1.0]])[None, :],
            ]
        )
    )
    q_e = np.concatenate([q, [_SLACK_PENALTY]])
    lo_e = np.concatenate([lo, [0.0]])
    hi_e = np.concatenate([hi, [np.inf]])
    prob = osqp.OSQP()
    settings = dict(_OSQP_SETTINGS, eps_abs=1e-7, eps_rel=1e-7)
    prob.setup(P, q_e, A, lo_e, hi_e, **settings)
    res = prob.solve(raise_error=False)
    ok = res.x is not None and np.all(np.isfinite(res.x))
    if not ok:
        raise RuntimeError(f"elastic QP subproblem failed: {res.info.status}")
    return res.x[:n], res.y[:-1]


def nmpc_step(
    x_current,
    goal: LiftGoal,
    s: ConstraintParams,
    cfg: OcpConfig,
    warm_start: Optional[np.ndarray] = None,
) -> NmpcResult:
    """Solve the OCP at the current state and return the first input.

    warm_start is the previous solution's input sequence (N, 4); it is
    shifted by one interval.  Non-convergence within the iteration budget
    returns the best iterate with converged=False; the caller decides
    whether to abort or retry.
    """
    t0 = time.perf_counter()
    ocp = build_ocp(x_current, goal, s, cfg)
    N, nu = ocp.N, ocp.nu
    if warm_start is not None and np.shape(warm_start) == (N, NX):
        U = np.vstack([warm_start[1:], warm_start[-1:]]).reshape(nu)
    else:
        U = np.zeros(nu)
    U = np.clip(U.reshape(N, NX), cfg.u_lo, cfg.u_hi).reshape(nu)

    H_csc = sp.csc_matrix(ocp.H)
    lo_u = np.tile(cfg.u_lo, N)
    hi_u = np.tile(cfg.u_hi, N)

    converged = False
    duals = None
    iterations = 0
    stalls = 0
    kkt = np.inf
    max_violation = np.inf
    eye_nu = np.eye(nu)
    inf_hi = np.full(NC * N, np.inf)
    for it in range(cfg.max_iter):
        m = ocp.margins(U)
        A_full = np.vstack([ocp.margins_jac(U), eye_nu])
        max_violation = float(max(0.0, -np.min(m)))
        # KKT check at the refreshed linearization with the previous QP's
        # duals; checking before solving avoids the degenerate zero-step
        # subproblem, whose duals are non-unique
        if duals is not None:
            kkt = float(np.max(np.abs(ocp.H @ U + ocp.g + A_full.T @ duals)))
            # tolerance relative to the dual magnitude: with active-set
            # duals of order 1e3 an absolute 1e-8 is below polish noise
            scale = max(1.0, float(np.max(np.abs(duals))))
            if kkt <= cfg.kkt_tol * scale and max_violation <= 1e-8:
                converged = True
                break
        iterations = it + 1
        q = ocp.H @ U + ocp.g
        # interior shortcut: if the unconstrained Newton step stays inside
        # the box and the true margins, no constraint is active and the QP
        # solution coincides with it
        p_free = ocp.newton_step(q)
        U_free = U + p_free
        if (
            np.all(U_free >= lo_u)
            and np.all(U_free <= hi_u)
            and np.min(ocp.margins(U_free)) >= 0.0
        ):
            U = U_free
            duals = np.zeros(NC * N + nu)
            continue
        lo = np.concatenate([-m, lo_u - U])
        hi = np.concatenate([inf_hi, hi_u - U])
        p, duals = _solve_qp(H_csc, q, A_full, lo, hi)
        if np.max(np.abs(p)) < 1e-12:
            U = np.clip((U + p).reshape(N, NX), cfg.u_lo, cfg.u_hi).reshape(nu)
            break
        # backtracking line search on the l1 merit function; a unit step
        # is accepted near the solution, damping only guards the cold
        # start where the theta linearization is far from valid
        mu = max(1.0, 2.0 * float(np.max(np.abs(duals))))
        viol0 = float(np.sum(np.maximum(0.0, -m)))
        phi0 = ocp.objective(U) + mu * viol0
        descent = float(q @ p) - mu * viol0
        alpha = 1.0
        U_try = U + p
        phi_try = phi0
        while alpha > 1e-4:
            U_try = np.clip((U + alpha * p).reshape(N, NX), cfg.u_lo, cfg.u_hi).reshape(nu)
            viol_try = float(np.sum(np.maximum(0.0, -ocp.margins(U_try))))
            phi_try = ocp.objective(U_try) + mu * viol_try
            if phi_try <= phi0 + 1e-4 * alpha * descent:
                break
            alpha *= 0.5
        U = U_try
        # an infeasible program cannot pass the KKT check; stop once the
        # merit function stalls and report the best-effort iterate
        if phi_try > phi0 - 1e-12:
            stalls += 1
            if stalls >= 2:
                break
        else:
            stalls = 0

    if not converged:
        m = ocp.margins(U)
        max_violation = float(max(0.0, -np.min(m)))
        if duals is not None:
            A_full = np.vstack([ocp.margins_jac(U), eye_nu])
            kkt = float(np.max(np.abs(ocp.H @ U + ocp.g + A_full.T @ duals)))
            scale = max(1.0, float(np.max(np.abs(duals))))
        else:
            scale = 1.0
        converged = kkt <= cfg.kkt_tol * scale and max_violation <= 1e-6

    Umat = U.reshape(N, NX)
    X = ocp.rollout(U)
    return NmpcResult(
        u=Umat[0].copy(),
        states=X,
        inputs=Umat.copy(),
        cost=float(ocp.objective(U)),
        converged=converged,
        iterations=iterations,
        kkt_residual=kkt,
        max_violation=max_violation,
        solve_time=time.perf_counter() - t0,
    )


def input_map(u_theta: float, R_A: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Angular-velocity command realizing the rotation about the fixed axis.

    Returns R_A a u_theta, interpreted as a spatial angular velocity; the
    full command to the arm is (u_x, u_y, u_z, u_phi).
    """
    a = np.asarray(a, dtype=float)
    if abs(np.linalg.norm(a) - 1.0) > 1e-6:
        raise ValueError("axis must be unit length")
    return (R_A @ a) * float(u_theta)


class NmpcController:
    """Receding-horizon wrapper holding the warm-start buffer for one arm."""

    def __init__(self, goal: LiftGoal, s: ConstraintParams, cfg: OcpConfig):
        self.goal = goal
        self.s = s
        self.cfg = cfg
        self._warm: Optional[np.ndarray] = None

    def step(self, x_current) -> NmpcResult:
        result = nmpc_step(x_current, self.goal, self.s, self.cfg, self._warm)
        self._warm = result.inputs
        return result
