"""Closed-loop multi-step walking of the 6-DoF model under the step supervisor."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..controllers import Mode, SupervisorState, supervise
from ..lip_core import GaitParams, StepState, fixed_point, make_params
from ..simulator import StepRecord, Trace
from .control import Gains, rollout, track
from .model import (BipedModel, com_state, ground_reaction, impact, point_state,
                    relabel)
from .planner import (DEFAULT_APEX, DEFAULT_RHO, PlanningError, StepTarget,
                      double_support_pose, double_support_rates, lip_defect,
                      plan_step)

log = logging.getLogger(__name__)

JOINT_LOG_HEADER = (["t"] + [f"q{k}" for k in range(1, 7)] + [f"qd{k}" for k in range(1, 7)]
                    + [f"tau{k}" for k in range(1, 7)] + ["x_cop", "fn", "mu_r"])


class ScenarioAbort(RuntimeError):
    """Lift-off, slip or planner failure; ``partial`` holds what ran."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class FullScenario:
    n_steps: int = 10
    push_step: Optional[int] = None
    push_impulse: float = 0.0
    dt: float = 1e-3
    gains: Gains = Gains()
    rho: float = DEFAULT_RHO
    apex: float = DEFAULT_APEX
    cop_half_length: float = 0.02  # for the abort check only
    converge_tol: float = 1e-4


def nominal_params(model: BipedModel) -> GaitParams:
    """The low-friction gait of the validation run: L*=0.05, T*=0.6, mu=0.15."""
    return make_params(h=0.22, mu=0.15, L_star=0.05, T_star=0.6,
                       mass=model.total_mass, g=model.gravity)


@dataclass
class FeasibilityReport:
    min_fn: float = math.inf
    peak_mu_r: float = 0.0
    cop_min: float = math.inf
    cop_max: float = -math.inf
    max_touchdown_speed: float = 0.0
    max_tracking_error: float = 0.0
    max_lip_defect: float = 0.0
    min_stance_knee: float = math.inf
    max_swing_knee: float = -math.inf
    min_clearance: float = math.inf
    residuals: dict = field(default_factory=dict)

    def absorb_plan(self, plan):
        for k, v in plan.residuals.items():
            self.residuals[k] = max(self.residuals.get(k, 0.0), v)

    def as_dict(self) -> dict:
        out = {k: getattr(self, k) for k in (
            "min_fn", "peak_mu_r", "cop_min", "cop_max", "max_touchdown_speed",
            "max_tracking_error", "max_lip_defect", "min_stance_knee",
            "max_swing_knee", "min_clearance")}
        out["residuals"] = dict(self.residuals)
        return out

    def holds(self, mu: float, cop_half: float = 0.02, touchdown: float = 1e-3) -> bool:
        return (self.min_fn > 0 and self.peak_mu_r < mu and self.cop_min >= -cop_half
                and self.cop_max <= cop_half and self.max_touchdown_speed < touchdown)


def initial_configuration(model: BipedModel, params: GaitParams):
    """Double-support posture at the gait's fixed point, trailing foot at -L*."""
    s = fixed_point(params.L_star, params.T_star, params.omega)
    q = double_support_pose(model, -params.L_star, (s.x0, params.h))
    qd, _ = double_support_rates(model, q, (s.xdot0, 0.0))
    return q, qd


def run_full_scenario(model: BipedModel, params: GaitParams, scenario: FullScenario,
                      q0=None, qd0=None):
    """Walk ``scenario.n_steps`` steps; return (Trace, FeasibilityReport, joint log).

    The joint log is an array with the columns of ``JOINT_LOG_HEADER``.
    """
    if q0 is None:
        q0, qd0 = initial_configuration(model, params)
    q, qd = np.asarray(q0, float), np.asarray(qd0, float)
    sup = SupervisorState()
    report = FeasibilityReport()
    trace = Trace()
    log_rows, samples = [], {k: [] for k in ("t", "step", "x", "xdot", "mu_r")}
    clock = 0.0

    def finish(outcome):
        trace.outcome = outcome
        for key, parts in samples.items():
            if parts:
                setattr(trace, key, np.concatenate(parts))
        joint_log = np.vstack(log_rows) if log_rows else np.zeros((0, len(JOINT_LOG_HEADER)))
        return trace, report, joint_log

    for i in range(1, scenario.n_steps + 1):
        com, com_v, _ = com_state(model, q, qd)
        before = StepState(float(com[0]), float(com_v[0]))
        if scenario.push_step == i and scenario.push_impulse:
            qd = impact(model, q, qd, scenario.push_impulse)
            com, com_v, _ = com_state(model, q, qd)
        s = StepState(float(com[0]), float(com_v[0]))
        cmd, sup = supervise(s, sup, params)
        if cmd.mode is Mode.UNRECOVERABLE:
            trace.records.append(StepRecord(i, before, s, cmd, abs(s.x0) / params.h, params))
            trace.final_state = s
            return finish("unrecoverable")

        target = StepTarget(cmd.L, cmd.T, s.x0, s.xdot0, params.h, params.omega)
        try:
            plan = plan_step(model, q, qd, target, rho=scenario.rho, apex=scenario.apex)
        except PlanningError as exc:
            trace.final_state = s
            raise ScenarioAbort(f"step {i}: {exc}; residuals {exc.residuals}",
                                finish("running")) from exc
        report.absorb_plan(plan)
        report.max_lip_defect = max(report.max_lip_defect, lip_defect(model, plan, params.omega))

        roll = rollout(model, track(model, plan, scenario.gains), q, qd, cmd.T, scenario.dt)
        fx, fy, x_cop, mu_r = ground_reaction(model, roll.q, roll.qd, roll.qdd)
        com_t, com_vt, _ = com_state(model, roll.q, roll.qd)
        q_des, _, _ = plan.evaluate(roll.t)
        _, sole_v, _ = point_state(model, "sole", roll.q[-1], roll.qd[-1])
        heel, _, _ = point_state(model, "heel", roll.q)
        toe, _, _ = point_state(model, "toe", roll.q)
        mid = np.argmin(np.abs(roll.t - cmd.T / 2))

        report.min_fn = min(report.min_fn, float(fy.min()))
        report.peak_mu_r = max(report.peak_mu_r, float(mu_r.max()))
        report.cop_min = min(report.cop_min, float(x_cop.min()))
        report.cop_max = max(report.cop_max, float(x_cop.max()))
        report.max_touchdown_speed = max(report.max_touchdown_speed, float(np.hypot(*sole_v)))
        report.max_tracking_error = max(report.max_tracking_error,
                                        float(np.abs(roll.q - q_des).max()))
        report.min_stance_knee = min(report.min_stance_knee, roll.q[mid, 1], roll.q[-1, 1])
        report.max_swing_knee = max(report.max_swing_knee, roll.q[mid, 3], roll.q[-1, 3])
        report.min_clearance = min(report.min_clearance,
                                   float(np.minimum(heel[1:-1, 1], toe[1:-1, 1]).min()))

        log_rows.append(np.column_stack([clock + roll.t, roll.q, roll.qd, roll.tau,
                                         x_cop, fy, mu_r]))
        samples["t"].append(clock + roll.t)
        samples["step"].append(np.full(roll.t.shape, i))
        samples["x"].append(com_t[:, 0])
        samples["xdot"].append(com_vt[:, 0])
        samples["mu_r"].append(mu_r)
        trace.records.append(StepRecord(i, before, s, cmd, float(mu_r.max()), params))
        clock += cmd.T

        if fy.min() <= 0:
            raise ScenarioAbort(f"step {i}: stance sole lift-off (f_n={fy.min():.4g})", finish("slipped"))
        if not mu_r.max() < params.mu:
            raise ScenarioAbort(f"step {i}: required friction {mu_r.max():.4g} >= mu={params.mu}",
                                finish("slipped"))

        q, qd = relabel(roll.q[-1], roll.qd[-1])

    com, com_v, _ = com_state(model, q, qd)
    trace.final_state = StepState(float(com[0]), float(com_v[0]))
    err = (trace.final_state - fixed_point(params.L_star, params.T_star, params.omega)).norm()
    settled = err < scenario.converge_tol and sup == SupervisorState()
    return finish("converged" if settled else "running")


def export_joint_log(joint_log: np.ndarray, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(JOINT_LOG_HEADER)
        for row in joint_log:
            w.writerow([repr(float(v)) for v in row])
    return path
