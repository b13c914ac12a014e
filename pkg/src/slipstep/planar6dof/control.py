"""Computed-torque joint tracking and fixed-step RK4 rollout."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import BipedModel, bias_forces, dynamics, mass_matrix
from .planner import QuinticPlan


@dataclass(frozen=True)
class Gains:
    kp: float = 400.0
    kd: float = 40.0

    def __post_init__(self):
        if self.kp < 0 or self.kd < 0:
            raise ValueError("gains must be non-negative")


def track(model: BipedModel, plan: QuinticPlan, gains: Gains = Gains()):
    """tau(t, q, qd) = M (qdd_d + kd e_dot + kp e) + h(q, qd)."""

    def torque(t, q, qd):
        q_d, qd_d, qdd_d = plan.evaluate(t)
        v = qdd_d + gains.kd * (qd_d - qd) + gains.kp * (q_d - q)
        return mass_matrix(model, q) @ v + bias_forces(model, q, qd)

    return torque


@dataclass
class Rollout:
    t: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    qdd: np.ndarray
    tau: np.ndarray


def rollout(model: BipedModel, torque, q0, qd0, T: float, dt: float = 1e-3) -> Rollout:
    """Integrate M qdd + h = tau(t, q, qd) over [0, T] with classical RK4.

    The step size is shrunk so that an integer number of steps ends at T.
    Accelerations and torques are logged at the grid points.
    """
    n = max(1, int(np.ceil(T / dt - 1e-9)))
    h = T / n

    def f(t, x):
        q, qd = x[:6], x[6:]
        return np.concatenate([qd, dynamics(model, q, qd, torque(t, q, qd))])

    x = np.concatenate([np.asarray(q0, float), np.asarray(qd0, float)])
    ts = np.linspace(0.0, T, n + 1)
    X = np.empty((n + 1, 12))
    X[0] = x
    for k in range(n):
        t = ts[k]
        k1 = f(t, x)
        k2 = f(t + h / 2, x + h / 2 * k1)
        k3 = f(t + h / 2, x + h / 2 * k2)
        k4 = f(t + h, x + h * k3)
        x = x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        X[k + 1] = x
    tau = np.array([torque(t, X[k, :6], X[k, 6:]) for k, t in enumerate(ts)])
    qdd = np.array([dynamics(model, X[k, :6], X[k, 6:], tau[k]) for k in range(n + 1)])
    return Rollout(ts, X[:, :6], X[:, 6:], qdd, tau)
