"""Quintic joint trajectories for one single-support step.

The step is planned in normalised time s = t/T with unknowns d_k = c_k T^(k+1),
so q(s) = q0 + qd0 T s + d1 s^2 + d2 s^3 + d3 s^4 + d4 s^5. The index
integrates (xdd - omega^2 x)^2 + rho (y_heel - y_heel_desired)^2 with
composite Simpson on 101 nodes; boundary and knee conditions are imposed as
constraints and the NLP is solved with SLSQP.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import least_squares, minimize

from ..lip_core import transition_matrix
from .model import (B, BipedModel, com_state, ground_reaction, point_jacobian,
                    point_kinematics, point_state, theta_of)

N_NODES = 101
DEFAULT_RHO = 1.0e2
DEFAULT_APEX = 0.02
CLEARANCE_NODES = N_NODES


class PlanningError(RuntimeError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals or {}


@dataclass(frozen=True)
class QuinticPlan:
    q0: np.ndarray
    qdot0: np.ndarray
    coeffs: np.ndarray  # rows c1..c4, each a 6-vector
    T: float
    residuals: dict = field(default_factory=dict, compare=False)
    objective: float = float("nan")

    @property
    def c1(self):
        return self.coeffs[0]

    @property
    def c2(self):
        return self.coeffs[1]

    @property
    def c3(self):
        return self.coeffs[2]

    @property
    def c4(self):
        return self.coeffs[3]

    def evaluate(self, t):
        """q, qdot, qddot at time(s) t; arrays get a leading time axis."""
        t = np.asarray(t, dtype=float)
        tt = t[..., None]
        c1, c2, c3, c4 = self.coeffs
        q = self.q0 + self.qdot0 * tt + c1 * tt ** 2 + c2 * tt ** 3 + c3 * tt ** 4 + c4 * tt ** 5
        qd = self.qdot0 + 2 * c1 * tt + 3 * c2 * tt ** 2 + 4 * c3 * tt ** 3 + 5 * c4 * tt ** 4
        qdd = 2 * c1 + 6 * c2 * tt + 12 * c3 * tt ** 2 + 20 * c4 * tt ** 3
        return q, qd, qdd


@dataclass(frozen=True)
class StepTarget:
    L: float
    T: float
    x0: float  # CoM minus stance ankle at step start
    xdot0: float
    h: float
    omega: float


def heel_profile(t, T, apex=DEFAULT_APEX):
    return apex * np.sin(np.pi * np.asarray(t) / T) ** 2


def _plan_from_d(q0, qd0, T, d) -> QuinticPlan:
    scale = np.array([T ** 2, T ** 3, T ** 4, T ** 5])[:, None]
    return QuinticPlan(np.asarray(q0, float), np.asarray(qd0, float), d / scale, T)


# ------------------------------------------------------------------ IK

def _pose_residual(model, q, ankle_x, com_xy):
    sole, _, _ = point_state(model, "sole", q)
    com, _, _ = com_state(model, q)
    return np.array([sole[0] - ankle_x, sole[1], com[0] - com_xy[0], com[1] - com_xy[1]])


def double_support_pose(model: BipedModel, swing_x: float, com_xy, guess=None) -> np.ndarray:
    """Both soles flat on the ground, torso upright, CoM at ``com_xy``.

    ``swing_x`` is the horizontal position of the swing sole point (below its
    ankle) relative to the stance ankle.
    """
    if guess is None:
        guess = np.array([1.45, 0.3, 0.2 if swing_x > 0 else -0.2, -0.3, 0.0, math.pi / 2])
    fixed = np.asarray(guess, float).copy()
    fixed[4], fixed[5] = 0.0, math.pi / 2

    def res(u):
        q = fixed.copy()
        q[:4] = u
        return _pose_residual(model, q, swing_x, com_xy)

    sol = least_squares(res, fixed[:4], xtol=1e-15, ftol=1e-15, gtol=1e-15)
    q = fixed.copy()
    q[:4] = sol.x
    if np.max(np.abs(res(sol.x))) > 1e-9:
        raise PlanningError("double-support pose unreachable",
                            {"pose": float(np.max(np.abs(res(sol.x))))})
    return q


def _task_jacobian(model, q):
    """Rows: swing sole x, y, CoM x, y, q5, q6."""
    geom = model.geometry
    J_sole = point_jacobian(geom, geom.V[geom.index["sole"]], q)
    J_com = point_jacobian(geom, geom.V_com, q)
    return np.vstack([J_sole, J_com, np.eye(6)[4], np.eye(6)[5]])


def double_support_rates(model, q, com_vel, com_acc=(0.0, 0.0), qd=None):
    """Joint velocity (and acceleration) with both feet and the torso at rest."""
    J = _task_jacobian(model, q)
    qd = np.linalg.solve(J, np.array([0.0, 0.0, com_vel[0], com_vel[1], 0.0, 0.0]))
    # drift terms J_dot qd from the acceleration of each task point at qdd = 0
    _, _, a_sole = point_state(model, "sole", q, qd, np.zeros(6))
    _, _, a_com = com_state(model, q, qd, np.zeros(6))
    rhs = np.array([-a_sole[0], -a_sole[1], com_acc[0] - a_com[0],
                    com_acc[1] - a_com[1], 0.0, 0.0])
    return qd, np.linalg.solve(J, rhs)


def quintic_between(q0, qd0, qdd0, q1, qd1, qdd1, T) -> QuinticPlan:
    """Quintic with prescribed position, velocity, acceleration at both ends."""
    q0, qd0, qdd0 = map(np.asarray, (q0, qd0, qdd0))
    # solve for d1..d4 in normalised time; d1 fixed by qdd0
    d1 = 0.5 * qdd0 * T ** 2
    r0 = q1 - q0 - qd0 * T - d1
    r1 = qd1 * T - qd0 * T - 2 * d1
    r2 = qdd1 * T ** 2 - 2 * d1
    Msys = np.array([[1, 1, 1], [3, 4, 5], [6, 12, 20]], dtype=float)
    d234 = np.linalg.solve(Msys, np.vstack([r0, r1, r2]))
    return _plan_from_d(q0, qd0, T, np.vstack([d1, d234]))


# ------------------------------------------------------------ the NLP

class _StepProblem:
    def __init__(self, model, q0, qd0, target: StepTarget, rho, apex):
        self.model, self.target = model, target
        self.q0, self.qd0 = np.asarray(q0, float), np.asarray(qd0, float)
        self.rho, self.apex = rho, apex
        T = target.T
        self.s = np.linspace(0.0, 1.0, N_NODES)
        self.t = self.s * T
        self.y_des = heel_profile(self.t, T, apex)
        A = transition_matrix(T, target.omega)
        self.end_x, self.end_xd = A.apply(target.x0, target.xdot0)
        self.clear_idx = np.linspace(0, N_NODES - 1, CLEARANCE_NODES).astype(int)[1:-1]
        self._cache_key = None

    def plan(self, u) -> QuinticPlan:
        return _plan_from_d(self.q0, self.qd0, self.target.T, u.reshape(4, 6))

    def _nodes(self, u):
        key = u.tobytes()
        if key != self._cache_key:
            p = self.plan(u)
            self._nodes_val = p.evaluate(self.t)
            self._cache_key = key
        return self._nodes_val

    def objective(self, u):
        q, qd, qdd = self._nodes(u)
        com, _, acc = com_state(self.model, q, qd, qdd)
        w2 = self.target.omega ** 2
        heel, _, _ = point_state(self.model, "heel", q)
        integrand = (acc[:, 0] - w2 * com[:, 0]) ** 2 + self.rho * (heel[:, 1] - self.y_des) ** 2
        return float(simpson(integrand, x=self.t))

    def equalities(self, u):
        q, qd, qdd = self._nodes(u)
        m, tg = self.model, self.target
        qT, qdT, qddT = q[-1], qd[-1], qdd[-1]
        sole, sole_v, _ = point_state(m, "sole", qT, qdT)
        com, com_v, _ = com_state(m, qT, qdT)
        cop_0 = ground_reaction(m, q[0], qd[0], qdd[0])[2]
        cop_T = ground_reaction(m, qT, qdT, qddT)[2]
        return np.array([
            sole[0] - tg.L, sole[1],                      # 1
            sole_v[0], sole_v[1],                         # 2
            com[0] - self.end_x, com_v[0] - self.end_xd,  # 3
            com[1] - tg.h, com_v[1],                      # 4
            cop_0, cop_T,                                 # 5
            qT[4], qdT[4],                                # 6
            qT[5] - math.pi / 2, qdT[5],                  # 7
        ])

    def inequalities(self, u):
        q, _, _ = self._nodes(u)
        mid = (N_NODES - 1) // 2
        geom = self.model.geometry
        idx = self.clear_idx
        th = theta_of(q[idx])
        pts = geom.V[[geom.index["heel"], geom.index["toe"]]]
        pos, _, _ = point_kinematics(geom, pts, th)
        return np.concatenate([
            [q[mid, 1], q[-1, 1], -q[mid, 3], -q[-1, 3]],  # 8
            pos[..., 1].ravel(),                            # swing sole above ground
        ])


EQUALITY_NAMES = ("sole_x", "sole_y", "sole_vx", "sole_vy", "com_x", "com_vx",
                  "com_y", "com_vy", "cop_0", "cop_T", "q5", "q5_dot", "q6", "q6_dot")


def initial_guess(model, q0, qd0, target: StepTarget) -> QuinticPlan:
    """Quintic through an inverse-kinematics end pose that meets the LIP targets."""
    A = transition_matrix(target.T, target.omega)
    xT, xdT = A.apply(target.x0, target.xdot0)
    qT = double_support_pose(model, target.L, (xT, target.h), guess=q0)
    w2 = target.omega ** 2
    qdT, qddT = double_support_rates(model, qT, (xdT, 0.0), (w2 * xT, 0.0))
    # start acceleration: keep the current CoM on the LIP and the torso still
    _, a_com, _ = com_state(model, q0, qd0, np.zeros(6))
    qdd0 = np.zeros(6)
    try:
        geom = model.geometry
        J_com = point_jacobian(geom, geom.V_com, q0)
        com0, _, a_drift = com_state(model, q0, qd0, np.zeros(6))
        rows = np.vstack([J_com, np.eye(6)[4:6]])
        rhs = np.array([w2 * com0[0] - a_drift[0], -a_drift[1], 0.0, 0.0])
        qdd0 = np.linalg.lstsq(rows, rhs, rcond=None)[0]
    except np.linalg.LinAlgError:
        pass
    return quintic_between(q0, qd0, qdd0, qT, qdT, qddT, target.T)


def naive_plan(model, q0, qd0, target: StepTarget) -> QuinticPlan:
    """Minimum-jerk style baseline: same end pose, zero end accelerations."""
    A = transition_matrix(target.T, target.omega)
    xT, xdT = A.apply(target.x0, target.xdot0)
    qT = double_support_pose(model, target.L, (xT, target.h), guess=q0)
    qdT, _ = double_support_rates(model, qT, (xdT, 0.0))
    z = np.zeros(6)
    return quintic_between(q0, qd0, z, qT, qdT, z, target.T)


def lip_defect(model, plan: QuinticPlan, omega: float, n: int = N_NODES) -> float:
    """max_t |xdd - omega^2 x| of the planned CoM."""
    q, qd, qdd = plan.evaluate(np.linspace(0.0, plan.T, n))
    com, _, acc = com_state(model, q, qd, qdd)
    return float(np.max(np.abs(acc[:, 0] - omega ** 2 * com[:, 0])))


def plan_step(model: BipedModel, q0, qd0, target: StepTarget, rho: float = DEFAULT_RHO,
              apex: float = DEFAULT_APEX, tol: float = 1e-6, maxiter: int = 400) -> QuinticPlan:
    """Solve the step NLP; raise PlanningError with residuals on failure."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    prob = _StepProblem(model, q0, qd0, target, rho, apex)
    guess = initial_guess(model, q0, qd0, target)
    scale = np.array([target.T ** 2, target.T ** 3, target.T ** 4, target.T ** 5])[:, None]
    u0 = (guess.coeffs * scale).ravel()
    res = minimize(prob.objective, u0, method="SLSQP",
                   constraints=[{"type": "eq", "fun": prob.equalities},
                                {"type": "ineq", "fun": prob.inequalities}],
                   options={"maxiter": maxiter, "ftol": 1e-11})
    eq = prob.equalities(res.x)
    ineq = prob.inequalities(res.x)
    residuals = {name: float(abs(v)) for name, v in zip(EQUALITY_NAMES, eq)}
    residuals["knee_violation"] = float(max(0.0, -np.min(ineq[:4])))
    residuals["clearance_violation"] = float(max(0.0, -np.min(ineq[4:])))
    worst = max(residuals.values())
    if worst > tol:
        raise PlanningError(f"step NLP did not converge ({res.message}); worst residual {worst:.3g}",
                            residuals)
    plan = prob.plan(res.x)
    return QuinticPlan(plan.q0, plan.qdot0, plan.coeffs, plan.T, residuals, float(res.fun))
