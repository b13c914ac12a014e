"""Step-length and step-time controllers and the supervisor sequencing them."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .friction_safety import (LengthInterval, PreconditionError,
                              classify_state, critical_velocity,
                              critical_window, return_length_range,
                              safe_length_range, slip_time)
from .lip_core import (GaitParams, ParameterError, StepState, fixed_point,
                       flow, orbit_energy, transition_matrix)

log = logging.getLogger(__name__)

FIXED_BORDER_RETREAT = 0.05
MOVING_BORDER_KAPPA = 0.8


class Mode(str, Enum):
    NOMINAL = "nominal"
    FIXED_BORDER = "fixed_border"
    MOVING_BORDER = "moving_border"
    UNRECOVERABLE = "unrecoverable"


class Target(str, Enum):
    PRIMARY = "primary_gait"
    ZERO = "zero_gait"


@dataclass(frozen=True)
class StepCommand:
    L: float
    T: float
    mode: Mode = Mode.NOMINAL
    target: Target = Target.PRIMARY

    def __post_init__(self):
        if not self.T > 0:
            raise ParameterError(f"step time must be positive, got {self.T!r}")


@dataclass(frozen=True)
class SupervisorState:
    active_target: Target = Target.PRIMARY
    moving_border_T: Optional[float] = None

    def __post_init__(self):
        if (self.moving_border_T is not None) != (self.active_target is Target.ZERO):
            raise ValueError("moving_border_T is set iff the zero gait is active")


def lyapunov(delta: StepState, T: float, omega: float) -> float:
    """V = (A21 dx + A22 dxdot)^2, the squared next-step velocity error."""
    A = transition_matrix(T, omega)
    return (A.a21 * delta.x0 + A.a22 * delta.xdot0) ** 2


def convergence_roots(delta: StepState, T_star: float, omega: float) -> tuple[float, float]:
    A = transition_matrix(T_star, omega)
    a11, a12, a21, a22 = A.a11, A.a12, A.a21, A.a22
    dx, dv = delta.x0, delta.xdot0
    dL1 = ((a11 * a21 + a21 * a22 + a21) * dx + (a12 * a21 + a22 * a22 + a22) * dv) / a21
    dL2 = ((a11 * a21 + a21 * a22 - a21) * dx + (a12 * a21 + a22 * a22 - a22) * dv) / a21
    return dL1, dL2


def convergence_range(delta: StepState, T_star: float, omega: float,
                      L_star: float = 0.0) -> LengthInterval:
    """Step lengths for which V does not increase; a point when V == 0."""
    dL1, dL2 = convergence_roots(delta, T_star, omega)
    lower, upper = min(dL1, dL2) + L_star, max(dL1, dL2) + L_star
    # V == 0, or roots closer than the spacing of floats near L_star
    if not lower < upper:
        return LengthInterval.point(0.5 * (dL1 + dL2) + L_star, "convergence")
    return LengthInterval.open(lower, upper, "convergence")


def safe_convergence_range(s: StepState, params: GaitParams) -> LengthInterval:
    delta = s - fixed_point(params.L_star, params.T_star, params.omega)
    conv = convergence_range(delta, params.T_star, params.omega, params.L_star)
    safe = safe_length_range(s, params.T_star, params)
    return safe.intersect(conv, "safe_convergence")


def step_length_command(s: StepState, params: GaitParams) -> float:
    """Midpoint of the safe-convergence range at the nominal step time."""
    if not classify_state(s, params.T_star, params).in_S:
        raise PreconditionError(
            "state outside the safe region; use the supervisor for time adjustment")
    sc = safe_convergence_range(s, params)
    if sc.is_empty:
        # only reachable through round-off at the safe-range border
        safe = safe_length_range(s, params.T_star, params)
        log.warning("empty safe-convergence range at %s, using safe midpoint", s)
        return safe.midpoint
    return sc.midpoint


def fixed_border_window(s: StepState, params: GaitParams) -> tuple[float, float]:
    """Admissible step-time window keeping x inside +-mu h for a state in A."""
    energy = orbit_energy(s, params.omega)
    xcr = critical_velocity(params.T_star, params)
    if energy <= xcr ** 2 - (params.omega * params.mu_h) ** 2:
        t_slip = slip_time(s, params)
        if t_slip is None:
            raise PreconditionError("state never slips; no time adjustment needed")
        return 0.0, t_slip
    return critical_window(s, params)


def fixed_border_adjust(s: StepState, params: GaitParams) -> StepCommand:
    """Shorten (or keep) this step's duration, then land back inside S."""
    if not classify_state(s, params.T_star, params).in_A:
        raise PreconditionError("fixed-border adjustment requires a state in A")
    lo, hi = fixed_border_window(s, params)
    pad = FIXED_BORDER_RETREAT * (hi - lo)
    T = min(max(params.T_star, lo + pad), hi - pad)
    landing = return_length_range(flow(s, T, params.omega), params.T_star, params)
    if landing.is_empty:
        log.warning("empty return range for %s, falling back to moving border", s)
        return moving_border_adjust(s, params)
    return StepCommand(landing.midpoint, T, Mode.FIXED_BORDER, Target.PRIMARY)


def zero_gait_params(params: GaitParams, T_m: float) -> GaitParams:
    return params.replace(L_star=0.0, T_star=T_m)


def moving_border_adjust(s: StepState, params: GaitParams,
                         kappa: float = MOVING_BORDER_KAPPA) -> StepCommand:
    """Shrink the desired step time so the secondary safe region holds s,
    and head for the marching-in-place gait."""
    if not 0.0 < kappa < 1.0:
        raise ParameterError("kappa must lie in (0, 1)")
    report = classify_state(s, params.T_star, params)
    if report.in_S:
        return StepCommand(params.L_star, params.T_star, Mode.NOMINAL, Target.PRIMARY)
    if not report.in_S0:
        return StepCommand(params.L_star, params.T_star, Mode.UNRECOVERABLE,
                           Target.PRIMARY)
    t_slip = slip_time(s, params)
    T_m = kappa * t_slip
    L = step_length_command(s, zero_gait_params(params, T_m))
    return StepCommand(L, T_m, Mode.MOVING_BORDER, Target.ZERO)


def _dispatch(s: StepState, params: GaitParams) -> tuple[StepCommand, SupervisorState]:
    report = classify_state(s, params.T_star, params)
    if report.in_S:
        cmd = StepCommand(step_length_command(s, params), params.T_star)
    elif report.in_A:
        cmd = fixed_border_adjust(s, params)
    elif report.in_D:
        cmd = moving_border_adjust(s, params)
    else:
        cmd = StepCommand(params.L_star, params.T_star, Mode.UNRECOVERABLE,
                          Target.PRIMARY)
    if cmd.target is Target.ZERO:
        return cmd, SupervisorState(Target.ZERO, cmd.T)
    return cmd, SupervisorState()


def supervise(s: StepState, state: SupervisorState, params: GaitParams
              ) -> tuple[StepCommand, SupervisorState]:
    """Pick the controller for this step.

    In the zero-gait stage the secondary step time is kept until the state
    enters the primary safe region, at which point the nominal gait resumes.
    """
    if state.active_target is Target.ZERO:
        if classify_state(s, params.T_star, params).in_S:
            return StepCommand(step_length_command(s, params), params.T_star), SupervisorState()
        zp = zero_gait_params(params, state.moving_border_T)
        if classify_state(s, zp.T_star, zp).in_S:
            cmd = StepCommand(step_length_command(s, zp), zp.T_star,
                              Mode.MOVING_BORDER, Target.ZERO)
            return cmd, state
    return _dispatch(s, params)


def friction_budget_split(mu: float, C: float) -> tuple[float, float]:
    """Share mu between longitudinal (C mu) and lateral (sqrt(1-C^2) mu)."""
    if not 0.0 < C < 1.0:
        raise ParameterError(f"C must lie in (0, 1), got {C!r}")
    return C * mu, math.sqrt(1.0 - C * C) * mu


__all__ = [
    "Mode", "Target", "StepCommand", "SupervisorState", "lyapunov",
    "convergence_roots", "convergence_range", "safe_convergence_range",
    "step_length_command", "fixed_border_window", "fixed_border_adjust",
    "moving_border_adjust", "zero_gait_params", "supervise",
    "friction_budget_split",
]
