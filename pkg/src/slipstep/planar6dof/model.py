"""Planar 6-DoF biped in single support.

Links, indexed 0..5 and described by absolute angles theta (from +x, CCW):
stance shank (ankle to knee), stance thigh (knee to hip), torso (hip up),
swing thigh (hip to knee), swing shank (knee to ankle) and swing foot.
The stance foot is welded to the ground with its ankle at (0, ankle_height).

Generalized coordinates:
    q1 = theta0                    stance ankle
    q2 = theta1 - theta0           stance knee, >= 0
    q3 = theta3 - theta1 + pi      inter-thigh angle, 0 with the legs parallel
    q4 = theta4 - theta3           swing knee, <= 0
    q5 = theta5                    swing sole angle, 0 when flat
    q6 = theta2                    torso, pi/2 when upright
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

DEFAULT_MODEL_FILE = Path(__file__).with_name("nao_like.yaml")

# theta = B q + THETA_OFFSET
B = np.array([
    [1, 0, 0, 0, 0, 0],
    [1, 1, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 1],
    [1, 1, 1, 0, 0, 0],
    [1, 1, 1, 1, 0, 0],
    [0, 0, 0, 0, 1, 0],
], dtype=float)
THETA_OFFSET = np.array([0.0, 0.0, 0.0, -math.pi, -math.pi, 0.0])

POINTS = ("shank_st", "thigh_st", "torso", "thigh_sw", "shank_sw", "foot_sw",
          "sole", "heel", "toe", "torso_mid")
N_BODIES = 6


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class Link:
    mass: float
    length: float
    com: float
    inertia: float


@dataclass(frozen=True)
class BipedModel:
    shank: Link
    thigh: Link
    torso: Link
    foot_mass: float
    foot_com: tuple
    foot_inertia: float
    ankle_height: float
    sole_fore: float = 0.02
    sole_aft: float = 0.02
    gravity: float = 9.8

    def __post_init__(self):
        for name in ("shank", "thigh", "torso"):
            link = getattr(self, name)
            if not (link.mass > 0 and link.length > 0 and link.inertia > 0):
                raise ModelError(f"{name}: mass, length and inertia must be positive")
        if not (self.foot_mass > 0 and self.foot_inertia > 0 and self.ankle_height > 0):
            raise ModelError("foot mass, inertia and ankle height must be positive")
        object.__setattr__(self, "_geom", _Geometry(self))

    @property
    def masses(self) -> np.ndarray:
        return self._geom.masses

    @property
    def inertias(self) -> np.ndarray:
        return self._geom.inertias

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum() + self.foot_mass)

    @property
    def geometry(self) -> "_Geometry":
        return self._geom


def load_model(path=DEFAULT_MODEL_FILE) -> BipedModel:
    raw = yaml.safe_load(Path(path).read_text())
    allowed = {"version", "gravity", "ankle_height", "sole_fore", "sole_aft",
               "shank", "thigh", "torso", "foot"}
    extra = set(raw) - allowed
    if extra:
        raise ModelError(f"unknown key(s) in model file: {sorted(extra)}")
    try:
        foot = raw["foot"]
        return BipedModel(
            shank=Link(**raw["shank"]), thigh=Link(**raw["thigh"]),
            torso=Link(**raw["torso"]), foot_mass=foot["mass"],
            foot_com=(foot["com_x"], foot["com_y"]), foot_inertia=foot["inertia"],
            ankle_height=raw["ankle_height"], sole_fore=raw.get("sole_fore", 0.02),
            sole_aft=raw.get("sole_aft", 0.02), gravity=raw.get("gravity", 9.8))
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed model file {path}: {exc}") from exc


class _Geometry:
    """Every tracked point is base + sum_j R(theta_j) V[p, j]."""

    def __init__(self, m: BipedModel):
        ls, lt, lo = m.shank.length, m.thigh.length, m.torso.length
        fx, fy = m.foot_com
        ha = m.ankle_height
        V = np.zeros((len(POINTS), 6, 2))
        knee, hip = (0, (ls, 0.0)), (1, (lt, 0.0))
        rows = {
            "shank_st": [(0, (ls - m.shank.com, 0.0))],
            "thigh_st": [knee, (1, (lt - m.thigh.com, 0.0))],
            "torso": [knee, hip, (2, (m.torso.com, 0.0))],
            "thigh_sw": [knee, hip, (3, (m.thigh.com, 0.0))],
            "shank_sw": [knee, hip, (3, (lt, 0.0)), (4, (m.shank.com, 0.0))],
            "foot_sw": [knee, hip, (3, (lt, 0.0)), (4, (ls, 0.0)), (5, (fx, fy))],
            "sole": [knee, hip, (3, (lt, 0.0)), (4, (ls, 0.0)), (5, (0.0, -ha))],
            "heel": [knee, hip, (3, (lt, 0.0)), (4, (ls, 0.0)), (5, (-m.sole_aft, -ha))],
            "toe": [knee, hip, (3, (lt, 0.0)), (4, (ls, 0.0)), (5, (m.sole_fore, -ha))],
            "torso_mid": [knee, hip, (2, (0.5 * lo, 0.0))],
        }
        for p, name in enumerate(POINTS):
            for j, v in rows[name]:
                V[p, j] = v
        self.V = V
        self.base = np.array([0.0, ha])
        self.index = {name: k for k, name in enumerate(POINTS)}
        self.masses = np.array([m.shank.mass, m.thigh.mass, m.torso.mass,
                                m.thigh.mass, m.shank.mass, m.foot_mass])
        self.inertias = np.array([m.shank.inertia, m.thigh.inertia, m.torso.inertia,
                                  m.thigh.inertia, m.shank.inertia, m.foot_inertia])
        self.stance_foot_com = np.array([fx, ha + fy])
        self.foot_mass = m.foot_mass
        self.total_mass = float(self.masses.sum() + m.foot_mass)
        self.g = m.gravity
        # whole-body CoM is linear in the same per-link vectors
        self.V_com = np.einsum("k,kjd->jd", self.masses, V[:N_BODIES]) / self.total_mass
        self.base_com = (self.base * self.masses.sum()
                         + self.stance_foot_com * m.foot_mass) / self.total_mass


def theta_of(q):
    return np.asarray(q) @ B.T + THETA_OFFSET


def q_of(theta):
    return np.linalg.solve(B, (np.asarray(theta) - THETA_OFFSET).T).T


def _rot(c, s, V):
    # R(theta_j) V[..., j, :] for angle arrays shaped (..., 6)
    return np.stack([c * V[..., 0] - s * V[..., 1], s * V[..., 0] + c * V[..., 1]], axis=-1)


def point_kinematics(geom: _Geometry, V, theta, thetad=None, thetadd=None):
    """Position, velocity and acceleration of points defined by ``V``.

    ``V`` is (6, 2) or (P, 6, 2); angle arrays are (6,) or (N, 6).
    Returns arrays shaped (..., 2) with broadcasting over N and P.
    """
    theta = np.asarray(theta)
    c, s = np.cos(theta), np.sin(theta)
    if V.ndim == 3:
        c, s = c[..., None, :], s[..., None, :]
    Rv = _rot(c, s, V)  # (..., 6, 2)
    Rv_perp = np.stack([-Rv[..., 1], Rv[..., 0]], axis=-1)
    pos = geom.base + Rv.sum(axis=-2)
    if thetad is None:
        return pos, None, None
    td = np.asarray(thetad)
    if V.ndim == 3:
        td = td[..., None, :]
    vel = np.einsum("...j,...jd->...d", td, Rv_perp)
    if thetadd is None:
        return pos, vel, None
    tdd = np.asarray(thetadd)
    if V.ndim == 3:
        tdd = tdd[..., None, :]
    acc = (np.einsum("...j,...jd->...d", tdd, Rv_perp)
           - np.einsum("...j,...jd->...d", td ** 2, Rv))
    return pos, vel, acc


def point_jacobian(geom: _Geometry, V, q) -> np.ndarray:
    """2x6 Jacobian of a point with respect to q."""
    th = theta_of(q)
    Rv = _rot(np.cos(th), np.sin(th), V)
    J_theta = np.stack([-Rv[:, 1], Rv[:, 0]])  # (2, 6)
    return J_theta @ B


def point_state(model: BipedModel, name: str, q, qd=None, qdd=None):
    geom = model.geometry
    V = geom.V[geom.index[name]]
    th = theta_of(q)
    thd = None if qd is None else np.asarray(qd) @ B.T
    thdd = None if qdd is None else np.asarray(qdd) @ B.T
    return point_kinematics(geom, V, th, thd, thdd)


def _body_terms(model: BipedModel, q, qd):
    geom = model.geometry
    th = theta_of(q)
    thd = B @ qd
    c, s = np.cos(th), np.sin(th)
    Rv = _rot(c[None, :], s[None, :], geom.V[:N_BODIES])  # (6 bodies, 6, 2)
    J = np.stack([-Rv[..., 1], Rv[..., 0]], axis=1)  # (bodies, 2, 6)
    Jdot_thd = -np.einsum("j,kjd->kd", thd ** 2, Rv)  # (bodies, 2)
    return J, Jdot_thd


def mass_matrix(model: BipedModel, q) -> np.ndarray:
    geom = model.geometry
    J, _ = _body_terms(model, q, np.zeros(6))
    M_theta = np.einsum("k,kdi,kdj->ij", geom.masses, J, J) + np.diag(geom.inertias)
    return B.T @ M_theta @ B


def bias_forces(model: BipedModel, q, qd) -> np.ndarray:
    """Coriolis/centrifugal plus gravity terms h(q, qd) in M qdd + h = tau."""
    geom = model.geometry
    J, Jdot_thd = _body_terms(model, q, qd)
    coriolis = np.einsum("k,kdi,kd->i", geom.masses, J, Jdot_thd)
    grav = geom.g * np.einsum("k,ki->i", geom.masses, J[:, 1, :])
    return B.T @ (coriolis + grav)


def gravity_forces(model: BipedModel, q) -> np.ndarray:
    return bias_forces(model, q, np.zeros(6))


def dynamics(model: BipedModel, q, qd, tau) -> np.ndarray:
    M = mass_matrix(model, q)
    return np.linalg.solve(M, np.asarray(tau) - bias_forces(model, q, qd))


def energy(model: BipedModel, q, qd) -> float:
    geom = model.geometry
    M = mass_matrix(model, q)
    pos, _, _ = point_kinematics(geom, geom.V[:N_BODIES], theta_of(q))
    potential = geom.g * (geom.masses @ pos[:, 1] + geom.foot_mass * geom.stance_foot_com[1])
    return float(0.5 * qd @ M @ qd + potential)


def com_state(model: BipedModel, q, qd=None, qdd=None):
    """Whole-body CoM (stance foot included): position, velocity, acceleration.

    Accepts single configurations or (N, 6) arrays.
    """
    geom = model.geometry
    th = theta_of(q)
    thd = None if qd is None else np.asarray(qd) @ B.T
    thdd = None if qdd is None else np.asarray(qdd) @ B.T
    pos, vel, acc = point_kinematics(geom, geom.V_com, th, thd, thdd)
    pos = pos - geom.base + geom.base_com
    return pos, vel, acc


def ground_reaction(model: BipedModel, q, qd, qdd):
    """Ground force on the stance sole and its center of pressure.

    Returns (f_x, f_y, x_cop, mu_r); vectorised over leading axes. ``x_cop``
    is measured from the stance ankle.
    """
    geom = model.geometry
    th = theta_of(q)
    thd = np.asarray(qd) @ B.T
    thdd = np.asarray(qdd) @ B.T
    pos, _, acc = point_kinematics(geom, geom.V[:N_BODIES], th, thd, thdd)
    m = geom.masses
    fx = np.einsum("k,...k->...", m, acc[..., 0])
    fy = np.einsum("k,...k->...", m, acc[..., 1]) + geom.total_mass * geom.g
    moment = (np.einsum("k,...k->...", m, pos[..., 0] * (acc[..., 1] + geom.g)
                        - pos[..., 1] * acc[..., 0])
              + np.einsum("k,...k->...", geom.inertias, thdd)
              + geom.foot_mass * geom.g * geom.stance_foot_com[0])
    with np.errstate(divide="ignore", invalid="ignore"):
        x_cop = moment / fy
        mu_r = np.abs(fx) / fy
    return fx, fy, x_cop, mu_r


def cop(model: BipedModel, q, qd, qdd):
    return ground_reaction(model, q, qd, qdd)[2]


def angular_momentum(model: BipedModel, q, qd, about=(0.0, 0.0)) -> float:
    geom = model.geometry
    th = theta_of(q)
    pos, vel, _ = point_kinematics(geom, geom.V[:N_BODIES], th, B @ qd)
    r = pos - np.asarray(about)
    return float(np.sum(geom.masses * (r[:, 0] * vel[:, 1] - r[:, 1] * vel[:, 0]))
                 + geom.inertias @ (B @ qd))


def linear_momentum(model: BipedModel, q, qd) -> np.ndarray:
    _, v, _ = com_state(model, q, qd)
    return model.total_mass * v


def impact(model: BipedModel, q, qd_minus, impulse) -> np.ndarray:
    """Velocity jump from a horizontal impulse at the torso midpoint.

    The stance ankle is pinned, so the ground supplies a reaction impulse and
    the CoM velocity change differs from F/m_total; angular momentum about
    the stance ankle changes by exactly r x F.
    """
    J = point_jacobian(model.geometry, model.geometry.V[model.geometry.index["torso_mid"]], q)
    Q_hat = J.T @ np.array([float(impulse), 0.0])
    return np.asarray(qd_minus) + np.linalg.solve(mass_matrix(model, q), Q_hat)


def relabel(q, qd) -> tuple[np.ndarray, np.ndarray]:
    """Swap the legs at touchdown.

    Absolute link angular velocities carry over; the old stance foot becomes
    the swing foot, starting flat and at rest.
    """
    th = theta_of(q)
    thd = B @ np.asarray(qd)
    th_new = np.array([th[4] + math.pi, th[3] + math.pi, th[2],
                       th[1] - math.pi, th[0] - math.pi, 0.0])
    thd_new = np.array([thd[4], thd[3], thd[2], thd[1], thd[0], 0.0])
    q_new = q_of(th_new)
    q_new[:4] = (q_new[:4] + math.pi) % (2 * math.pi) - math.pi
    return q_new, np.linalg.solve(B, thd_new)
