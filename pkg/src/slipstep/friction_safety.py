"""No-slip geometry of the LIP step: safe regions, step-length ranges and
critical times.

Open inequalities ``v < mu*h`` are evaluated as ``v < mu*h - eps`` with
``eps = 1e-9 * max(1, mu*h)``; states on a border are treated as unsafe.
The step-length ranges use the same shrunken bound so that a length picked
inside a range produces a successor that ``classify_state`` accepts.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .lip_core import (GaitParams, StepState, flow_samples, orbit_energy,
                       transition_matrix)

EPS_REL = 1e-9


class PreconditionError(ValueError):
    """The state does not satisfy the operation's region precondition."""


def margin(params: GaitParams) -> float:
    return EPS_REL * max(1.0, params.mu_h)


def safe_bound(params: GaitParams) -> float:
    """mu*h shrunk by the classification margin."""
    return params.mu_h - margin(params)


@dataclass(frozen=True)
class LengthInterval:
    """Open interval of step lengths; a single point when degenerate."""

    lower: float
    upper: float
    kind: str
    is_empty: bool = False

    @classmethod
    def open(cls, lower: float, upper: float, kind: str) -> "LengthInterval":
        return cls(float(lower), float(upper), kind, is_empty=not lower < upper)

    @classmethod
    def point(cls, value: float, kind: str) -> "LengthInterval":
        return cls(float(value), float(value), kind)

    @classmethod
    def empty(cls, kind: str) -> "LengthInterval":
        return cls(0.0, 0.0, kind, is_empty=True)

    @property
    def degenerate(self) -> bool:
        return not self.is_empty and self.lower == self.upper

    @property
    def width(self) -> float:
        return 0.0 if self.is_empty else self.upper - self.lower

    @property
    def midpoint(self) -> float:
        if self.is_empty:
            raise ValueError("empty interval has no midpoint")
        return 0.5 * (self.lower + self.upper)

    def contains(self, L: float) -> bool:
        if self.is_empty:
            return False
        if self.degenerate:
            return L == self.lower
        return self.lower < L < self.upper

    def intersect(self, other: "LengthInterval", kind: str) -> "LengthInterval":
        if self.is_empty or other.is_empty:
            return LengthInterval.empty(kind)
        if self.degenerate or other.degenerate:
            p, q = (self, other) if self.degenerate else (other, self)
            if q.contains(p.lower) or (q.degenerate and q.lower == p.lower):
                return LengthInterval.point(p.lower, kind)
            return LengthInterval.empty(kind)
        return LengthInterval.open(max(self.lower, other.lower),
                                   min(self.upper, other.upper), kind)


@dataclass(frozen=True)
class RegionReport:
    in_S0: bool
    in_Sm: bool
    in_ST: bool
    in_Rm: bool
    in_S: bool
    in_D: bool
    in_A: bool
    t_m: Optional[float] = None
    x_m: Optional[float] = None
    x_T: float = 0.0


def required_friction(x, h: float):
    """Instantaneous friction demand |f_s|/f_n = |x|/h of the LIP."""
    return np.abs(x) / h if isinstance(x, np.ndarray) else abs(x) / h


def extremum(s: StepState, omega: float) -> Optional[tuple[float, float]]:
    """Time and value of the stationary point of x(t), or None.

    Exists iff |xdot0| < omega|x0|; the time is negative when the stationary
    point lies in the past. ``xdot0 == 0`` (stationary at t=0) returns None.
    """
    wx = omega * s.x0
    if s.xdot0 == 0.0 or not abs(s.xdot0) < abs(wx):
        return None
    num, den = wx - s.xdot0, wx + s.xdot0
    t_m = math.log(num / den) / (2.0 * omega)
    x_m = math.copysign(math.sqrt(num * den), s.x0) / omega
    return t_m, x_m


def critical_velocity(T: float, params: GaitParams) -> float:
    """xdot_cr = (A11 + 1)/A12 * mu h, largest |xdot| a safe state can carry."""
    A = transition_matrix(T, params.omega)
    return (A.a11 + 1.0) / A.a12 * safe_bound(params)


def classify_state(s: StepState, T: float, params: GaitParams) -> RegionReport:
    A = transition_matrix(T, params.omega)
    w = params.omega
    bound = safe_bound(params)
    x0, v0 = s.x0, s.xdot0

    x_T = A.a11 * x0 + A.a12 * v0
    in_S0 = abs(x0) < bound
    in_ST = abs(x_T) < bound
    in_Rm = v0 * (v0 + A.a21 / A.a22 * x0) < 0
    gap = (w * x0) ** 2 - v0 ** 2
    in_Sm = 0.0 < gap < (w * bound) ** 2

    t_m = x_m = None
    if in_Rm:
        ext = extremum(s, w)
        if ext is not None:
            t_m, x_m = ext

    in_D = in_S0 and not in_ST
    xcr = (A.a11 + 1.0) / A.a12 * bound
    energy = orbit_energy(s, w)
    in_A = in_D and (((energy < xcr ** 2) and (x0 * v0 < 0))
                     or ((v0 ** 2 < xcr ** 2) and (x0 * v0 > 0)))
    return RegionReport(in_S0=in_S0, in_Sm=in_Sm, in_ST=in_ST, in_Rm=in_Rm,
                        in_S=in_S0 and in_ST, in_D=in_D, in_A=in_A,
                        t_m=t_m, x_m=x_m, x_T=x_T)


def in_safe_region_by_parts(report: RegionReport) -> bool:
    """S as the union S_ext | S_nxt built from S0, ST, Sm and Rm."""
    s_ext = report.in_S0 and report.in_ST and report.in_Sm and report.in_Rm
    s_nxt = report.in_S0 and report.in_ST and not report.in_Rm
    return s_ext or s_nxt


def safe_length_range(s: StepState, T: float, params: GaitParams) -> LengthInterval:
    """Step lengths whose successor state lies in S (for the same T)."""
    A = transition_matrix(T, params.omega)
    bound = safe_bound(params)
    x_T = A.a11 * s.x0 + A.a12 * s.xdot0
    lin = (2.0 * A.a11 - 1.0 / A.a11) * s.x0 + 2.0 * A.a12 * s.xdot0
    lower = max(x_T - bound, lin - bound / A.a11)
    upper = min(x_T + bound, lin + bound / A.a11)
    return LengthInterval.open(lower, upper, "safe")


def slip_time(s: StepState, params: GaitParams) -> Optional[float]:
    """First t > 0 at which |x(t)| reaches mu*h; None if it never does."""
    if not abs(s.x0) < safe_bound(params):
        raise PreconditionError(
            f"immediate slippage state: |x0|={abs(s.x0):.6g} >= mu*h={params.mu_h:.6g}")
    w = params.omega
    den = abs(s.xdot0 + w * s.x0)
    # on the stable manifold x(t) decays to zero and never reaches the border
    if den <= 1e-15 * max(1.0, abs(s.xdot0), abs(w * s.x0)):
        return None
    wmh = w * params.mu_h
    num = wmh + math.sqrt(wmh ** 2 + orbit_energy(s, w))
    return math.log(num / den) / w


def critical_window(s: StepState, params: GaitParams) -> tuple[float, float]:
    """Times (T1, T2) bounding the interval where |xdot(t)| < xdot_cr."""
    w = params.omega
    if not abs(s.x0) < safe_bound(params):
        raise PreconditionError("state outside S0")
    xcr = critical_velocity(params.T_star, params)
    energy = orbit_energy(s, w)
    lo = xcr ** 2 - (w * params.mu_h) ** 2
    if not lo < energy <= xcr ** 2:
        raise PreconditionError(
            f"orbit energy {energy:.6g} outside the critical-window branch "
            f"({lo:.6g}, {xcr ** 2:.6g}]")
    den = abs(s.xdot0 + w * s.x0)
    if den == 0.0:
        raise PreconditionError("state on the stable manifold")
    root = math.sqrt(xcr ** 2 - energy)
    T1 = math.log(max(1.0, (xcr - root) / den)) / w
    T2 = math.log((xcr + root) / den) / w
    return T1, T2


def return_length_range(s_end: StepState, T_next: float,
                        params: GaitParams) -> LengthInterval:
    """Step lengths bringing the end-of-step state (x(T), xdot(T)) into S."""
    A = transition_matrix(T_next, params.omega)
    bound = safe_bound(params)
    x, v = s_end.x0, s_end.xdot0
    x_right = min(bound, (bound - A.a12 * v) / A.a11)
    x_left = max(-bound, (-bound - A.a12 * v) / A.a11)
    return LengthInterval.open(x - x_right, x - x_left, "return")


def brute_force_safe(s: StepState, T: float, params: GaitParams,
                     n_grid: int = 2000) -> bool:
    """Dense-grid check of max_{0<=t<=T} |x(t)| < mu*h."""
    if n_grid < 1000:
        raise ValueError("n_grid must be at least 1000")
    x, _ = flow_samples(s, np.linspace(0.0, T, n_grid + 1), params.omega)
    peak = float(np.max(np.abs(x)))
    ext = extremum(s, params.omega)
    if ext is not None and 0.0 < ext[0] < T:
        peak = max(peak, abs(ext[1]))
    return peak < params.mu_h


def region_boundaries(T: float, params: GaitParams, n: int = 101,
                      xdot_extent: Optional[float] = None) -> list[tuple[str, str, float, float]]:
    """Sampled polylines of the region borders in the (x, xdot) plane.

    Rows are ``(region, branch, x, xdot)``. The D and A regions are unbounded
    in xdot and are clipped at ``xdot_extent`` (default 2 * xdot_cr).
    """
    if n < 2:
        raise ValueError("grid needs at least 2 points per polyline")
    A = transition_matrix(T, params.omega)
    w, mh = params.omega, params.mu_h
    xcr = (A.a11 + 1.0) / A.a12 * mh
    vmax = 2.0 * xcr if xdot_extent is None else float(xdot_extent)
    xs = np.linspace(-mh, mh, n)
    rows: list[tuple[str, str, float, float]] = []

    def emit(region, branch, xv, vv):
        rows.extend((region, branch, float(a), float(b)) for a, b in zip(xv, vv))

    top = (-A.a11 * xs + mh) / A.a12
    bottom = (-A.a11 * xs - mh) / A.a12
    emit("S", "upper", xs, top)
    emit("S", "lower", xs, bottom)
    emit("S", "left", [-mh, -mh], [bottom[0], top[0]])
    emit("S", "right", [mh, mh], [bottom[-1], top[-1]])

    emit("mu_h", "left", [-mh, -mh], [-vmax, vmax])
    emit("mu_h", "right", [mh, mh], [-vmax, vmax])
    emit("xdot_cr", "upper", [-mh, mh], [xcr, xcr])
    emit("xdot_cr", "lower", [-mh, mh], [-xcr, -xcr])

    emit("D", "upper", xs, np.minimum(top, vmax))
    emit("D", "lower", xs, np.maximum(bottom, -vmax))

    # outer border of A: hyperbola for x*xdot < 0, flat line for x*xdot > 0
    hyper = np.sqrt(xcr ** 2 + (w * xs) ** 2)
    a_upper = np.where(xs < 0, hyper, xcr)
    keep = a_upper > top
    emit("A", "upper", xs[keep], np.minimum(a_upper[keep], vmax))
    a_lower = np.where(xs > 0, -hyper, -xcr)
    keep = a_lower < bottom
    emit("A", "lower", xs[keep], np.maximum(a_lower[keep], -vmax))
    return rows


def export_region_boundaries(path, T: float, params: GaitParams, n: int = 101) -> Path:
    path = Path(path)
    rows = region_boundaries(T, params, n)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["region", "branch", "x", "xdot"])
        for region, branch, x, v in rows:
            writer.writerow([region, branch, f"{x:.10g}", f"{v:.10g}"])
    return path
