import math

import numpy as np
import pytest

from slipstep.acceptance import nominal_walk, sixdof_model_checks
from slipstep.lip_core import fixed_point
from slipstep.planar6dof import model as md
from slipstep.planar6dof.control import Gains, rollout, track
from slipstep.planar6dof.planner import (StepTarget, lip_defect, naive_plan,
                                         plan_step)
from slipstep.planar6dof.scenario import (JOINT_LOG_HEADER, export_joint_log,
                                          initial_configuration, nominal_params)

MODEL = md.load_model()
PARAMS = nominal_params(MODEL)
RNG = np.random.default_rng(7)


@pytest.fixture(scope="module")
def first_step():
    q0, qd0 = initial_configuration(MODEL, PARAMS)
    s = fixed_point(PARAMS.L_star, PARAMS.T_star, PARAMS.omega)
    target = StepTarget(PARAMS.L_star, PARAMS.T_star, s.x0, s.xdot0, PARAMS.h, PARAMS.omega)
    return q0, qd0, target, plan_step(MODEL, q0, qd0, target)


def test_model_file_and_mass():
    assert MODEL.total_mass == pytest.approx(4.42)
    assert MODEL.gravity == 9.8


def test_model_rejects_unknown_keys(tmp_path):
    text = md.DEFAULT_MODEL_FILE.read_text() + "\nwings: 2\n"
    path = tmp_path / "m.yaml"
    path.write_text(text)
    with pytest.raises(md.ModelError):
        md.load_model(path)


def test_angle_maps_are_inverse():
    q = RNG.uniform(-3, 3, 6)
    assert md.q_of(md.theta_of(q)) == pytest.approx(q)


def test_mass_matrix_symmetric_positive_definite():
    for _ in range(50):
        M = md.mass_matrix(MODEL, RNG.uniform(-math.pi, math.pi, 6))
        assert np.abs(M - M.T).max() < 1e-12
        assert np.linalg.eigvalsh(M).min() > 0


def test_point_jacobian_matches_finite_differences():
    q = RNG.uniform(-1, 1, 6)
    geom = MODEL.geometry
    V = geom.V[geom.index["toe"]]
    J = md.point_jacobian(geom, V, q)
    eps = 1e-7
    for k in range(6):
        dq = np.zeros(6)
        dq[k] = eps
        hi, _, _ = md.point_state(MODEL, "toe", q + dq)
        lo, _, _ = md.point_state(MODEL, "toe", q - dq)
        assert (hi - lo) / (2 * eps) == pytest.approx(J[:, k], abs=1e-7)


def test_gravity_compensation_holds_still():
    q = RNG.uniform(-1, 1, 6)
    qdd = md.dynamics(MODEL, q, np.zeros(6), md.gravity_forces(MODEL, q))
    assert np.abs(qdd).max() < 1e-10


def test_static_cop_is_below_com():
    q, _ = initial_configuration(MODEL, PARAMS)
    z = np.zeros(6)
    fx, fy, x_cop, mu_r = md.ground_reaction(MODEL, q, z, z)
    com, _, _ = md.com_state(MODEL, q)
    assert fx == pytest.approx(0.0, abs=1e-12) and mu_r == pytest.approx(0.0, abs=1e-12)
    assert fy == pytest.approx(MODEL.total_mass * 9.8)
    assert x_cop == pytest.approx(com[0], abs=1e-12)


def test_energy_balance_and_impact_bookkeeping():
    chk = sixdof_model_checks(n=100)
    assert chk["energy_rel"] < 1e-6
    assert chk["impact_rel"] < 1e-9


def test_passive_motion_conserves_energy():
    q0 = np.array([1.4, 0.5, -0.1, -0.6, 0.1, 1.5])
    zero = lambda t, q, qd: np.zeros(6)
    roll = rollout(MODEL, zero, q0, np.zeros(6), 0.2, dt=1e-4)
    E = [md.energy(MODEL, q, qd) for q, qd in zip(roll.q, roll.qd)]
    assert max(E) - min(E) < 1e-8 * abs(E[0])


def test_zero_impulse_changes_nothing():
    q = RNG.uniform(-1, 1, 6)
    qd = RNG.normal(size=6)
    assert md.impact(MODEL, q, qd, 0.0) == pytest.approx(qd)


def test_relabel_swaps_legs_and_keeps_torso():
    q = np.array([1.45, 0.3, -0.2, -0.5, 0.0, 1.62])
    qd = RNG.normal(size=6)
    th, thd = md.theta_of(q), md.B @ qd
    q1, qd1 = md.relabel(q, qd)
    th1, thd1 = md.theta_of(q1), md.B @ qd1
    assert th1[2] == pytest.approx(th[2]) and thd1[2] == pytest.approx(thd[2])
    # the old swing shank becomes the stance shank, pointing the other way
    assert math.cos(th1[0]) == pytest.approx(-math.cos(th[4]))
    assert math.sin(th1[0]) == pytest.approx(-math.sin(th[4]))
    assert thd1[0] == pytest.approx(thd[4]) and thd1[4] == pytest.approx(thd[0])
    # the new swing foot starts flat and at rest
    assert math.sin(th1[5]) == pytest.approx(0.0, abs=1e-12)
    assert thd1[5] == pytest.approx(0.0, abs=1e-12)
    q2, _ = md.relabel(q1, qd1)
    assert q2[:4] == pytest.approx(q[:4])


def test_plan_meets_constraints(first_step):
    _, _, _, plan = first_step
    assert max(plan.residuals.values()) < 1e-6
    assert set(plan.residuals) >= {"sole_x", "com_vx", "cop_T", "knee_violation"}


def test_plan_beats_naive_interpolation_on_lip_fidelity(first_step):
    q0, qd0, target, plan = first_step
    planned = lip_defect(MODEL, plan, PARAMS.omega)
    naive = lip_defect(MODEL, naive_plan(MODEL, q0, qd0, target), PARAMS.omega)
    assert naive >= 10 * planned


def test_tracking_and_zero_gain_divergence(first_step):
    q0, qd0, target, plan = first_step
    roll = rollout(MODEL, track(MODEL, plan), q0, qd0, target.T)
    q_des, _, _ = plan.evaluate(roll.t)
    assert np.abs(roll.q - q_des).max() < 1e-6
    # perturbed start: feedback pulls back, pure feedforward drifts away
    dq = np.full(6, 1e-3)
    fb = rollout(MODEL, track(MODEL, plan), q0 + dq, qd0, target.T)
    ff = rollout(MODEL, track(MODEL, plan, Gains(0.0, 0.0)), q0 + dq, qd0, target.T)
    err_fb = np.abs(fb.q[-1] - q_des[-1]).max()
    err_ff = np.abs(ff.q[-1] - q_des[-1]).max()
    assert err_fb < 1e-4 < err_ff


def test_integrator_step_halving(first_step):
    q0, qd0, target, plan = first_step
    tau = track(MODEL, plan)
    coarse = rollout(MODEL, tau, q0, qd0, target.T, dt=2e-3)
    fine = rollout(MODEL, tau, q0, qd0, target.T, dt=1e-3)
    assert np.abs(coarse.q[-1] - fine.q[-1]).max() < 1e-8


@pytest.mark.slow
def test_nominal_walk_is_feasible(tmp_path):
    trace, rep, joint_log = nominal_walk()
    assert len(trace.records) == 10
    assert trace.outcome in ("converged", "running")
    assert rep.holds(PARAMS.mu)
    assert rep.peak_mu_r < PARAMS.mu and rep.min_fn > 0
    assert rep.max_touchdown_speed < 1e-3
    assert rep.min_clearance > -1e-5
    path = export_joint_log(joint_log[:5], tmp_path / "j.csv")
    assert path.read_text().splitlines()[0].split(",") == JOINT_LOG_HEADER
