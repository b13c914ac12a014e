import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from slipstep.friction_safety import (LengthInterval, PreconditionError,
                                      brute_force_safe, classify_state,
                                      critical_velocity, critical_window,
                                      export_region_boundaries, extremum,
                                      in_safe_region_by_parts, required_friction,
                                      return_length_range, safe_length_range,
                                      slip_time)
from slipstep.lip_core import (StepState, fixed_point, flow, flow_samples,
                               make_params, step_map)

W = math.sqrt(9.8)
P21 = make_params(mu=0.21)
P30 = make_params(mu=0.3)


def dense_safe(s, T, p, n=20001):
    x, _ = flow_samples(s, np.linspace(0, T, n), p.omega)
    return np.abs(x).max() < p.mu_h


def test_required_friction():
    assert required_friction(0.21, 1.0) == pytest.approx(0.21)
    assert required_friction(0.0, 1.0) == 0.0
    assert required_friction(0.21, 1.3) == pytest.approx(0.1615, abs=1e-4)
    assert required_friction(np.array([-0.1, 0.2]), 2.0) == pytest.approx([0.05, 0.1])


def test_extremum_against_grid_minimum():
    s = StepState(-0.2, 0.3)
    t_m, x_m = extremum(s, W)
    t = np.linspace(0, 0.4, 400001)
    x, _ = flow_samples(s, t, W)
    k = np.argmin(np.abs(x))
    assert t_m == pytest.approx(t[k], abs=1e-6)
    assert x_m == pytest.approx(x[k], abs=1e-9)
    assert (t_m, x_m) == pytest.approx((0.166712, -0.175546), abs=1e-6)
    assert abs(flow(s, t_m, W).xdot0) < 1e-9


def test_extremum_absent_cases():
    assert extremum(StepState(-0.2, 1.1274), W) is None
    assert extremum(StepState(0.1, 0.0), W) is None


def test_classify_nominal_state():
    r = classify_state(StepState(-0.2, 1.1274), 0.4, P21)
    assert (r.in_S0, r.in_ST, r.in_Rm, r.in_S, r.in_D) == (True, True, False, True, False)
    assert r.x_T == pytest.approx(0.2, abs=1e-4)
    assert dense_safe(StepState(-0.2, 1.1274), 0.4, P21)


def test_classify_push_cases():
    r = classify_state(StepState(-0.2, 1.7274), 0.4, P30)
    assert r.in_S0 and not r.in_ST and r.in_D and r.in_A
    assert r.x_T == pytest.approx(0.5079, abs=1e-4)
    r = classify_state(StepState(-0.2, 2.0274), 0.4, P30)
    assert r.in_D and not r.in_A


@settings(max_examples=500, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(-3, 3), st.floats(0.1, 1.0), st.floats(0.05, 1.0))
def test_report_invariants(x, v, T, mu):
    p = make_params(mu=mu)
    r = classify_state(StepState(x, v), T, p)
    assert r.in_S == (r.in_S0 and r.in_ST)
    assert r.in_S == in_safe_region_by_parts(r)
    assert not r.in_D or (r.in_S0 and not r.in_ST)
    assert not r.in_A or r.in_D
    if r.t_m is not None:
        assert r.in_Rm


def test_safe_length_range_example_and_oracle():
    s, T = StepState(-0.2, 1.3074), 0.4
    rng_ = safe_length_range(s, T, P30)
    assert (rng_.lower, rng_.upper) == pytest.approx((0.5319, 0.5924), abs=1e-4)
    for L in np.linspace(rng_.lower, rng_.upper, 102)[1:-1]:
        assert dense_safe(step_map(s, L, T, W), T, P30)
    for L in (rng_.lower - 1e-4, rng_.upper + 1e-4):
        assert not dense_safe(step_map(s, L, T, W), T, P30)


def test_safe_length_range_other_examples():
    p = make_params(mu=1.5)
    assert safe_length_range(fixed_point(0.4, 0.4, W), 0.4, p).contains(0.4)
    assert safe_length_range(StepState(-0.2, 2.0274), 0.4, P30).is_empty


def bisect_slip(s, p, t_hi=5.0):
    f = lambda t: abs(flow(s, t, p.omega).x0) - p.mu_h
    grid = np.linspace(0, t_hi, 5001)
    vals = [f(t) for t in grid]
    k = next(i for i, v in enumerate(vals) if v >= 0)
    return brentq(f, grid[k - 1], grid[k], xtol=1e-13)


def test_slip_time_examples():
    s = StepState(-0.2, 2.0274)
    assert slip_time(s, P30) == pytest.approx(bisect_slip(s, P30), abs=1e-9)
    assert slip_time(s, P30) == pytest.approx(0.2520, abs=1e-3)
    assert slip_time(StepState(0.0, 0.0), P30) is None
    assert slip_time(StepState(-0.2, 1.1274), P21) == pytest.approx(0.4, abs=0.01)


def test_slip_time_outside_S0():
    with pytest.raises(PreconditionError, match="immediate slippage"):
        slip_time(StepState(0.31, 0.0), P30)


@settings(max_examples=300, deadline=None)
@given(st.floats(-0.29, 0.29), st.floats(-3, 3))
def test_slip_time_matches_bisection(x, v):
    s = StepState(x, v)
    t = slip_time(s, P30)
    if t is None or t > 4.0:
        return
    assert t == pytest.approx(bisect_slip(s, P30), abs=1e-8)


def test_critical_window_example():
    s = StepState(-0.2, 1.7274)
    xcr = critical_velocity(0.4, P30)
    assert xcr == pytest.approx(1.6910, abs=1e-3)
    T1, T2 = critical_window(s, P30)
    assert 0 <= T1 < T2
    g = lambda t: abs(flow(s, t, W).xdot0) - xcr
    t = np.linspace(0, 1, 10001)
    vals = np.array([g(tt) for tt in t])
    inside = t[vals < 0]
    assert T1 == pytest.approx(max(inside.min(), 0.0), abs=2e-4)
    assert T2 == pytest.approx(inside.max(), abs=2e-4)


def test_critical_window_preconditions():
    with pytest.raises(PreconditionError):
        critical_window(StepState(-0.2, 2.5), P30)
    with pytest.raises(PreconditionError):
        critical_window(StepState(0.4, 0.0), P30)


def test_return_length_range():
    bound = P30.mu_h - 1e-9
    A11 = math.cosh(W * 0.4)
    r = return_length_range(StepState(0.1, 0.0), 0.4, P30)
    assert r.upper - 0.1 == pytest.approx(bound / A11)
    assert 0.1 - r.lower == pytest.approx(bound / A11)
    end = StepState(0.25, 1.2)
    r = return_length_range(end, 0.4, P30)
    assert not r.is_empty
    for L in np.linspace(r.lower, r.upper, 52)[1:-1]:
        nxt = StepState(end.x0 - L, end.xdot0)
        assert classify_state(nxt, 0.4, P30).in_S
    assert return_length_range(StepState(0.25, 2.5), 0.4, P30).is_empty


def test_brute_force_trivial_cases():
    assert brute_force_safe(StepState(0, 0), 0.4, P30)
    assert not brute_force_safe(StepState(0.303, 0), 0.4, P30)
    with pytest.raises(ValueError):
        brute_force_safe(StepState(0, 0), 0.4, P30, n_grid=10)


def test_length_interval_semantics():
    a = LengthInterval.open(0.0, 1.0, "safe")
    assert a.contains(0.5) and not a.contains(1.0)
    assert LengthInterval.open(1.0, 0.0, "safe").is_empty
    p = LengthInterval.point(0.3, "convergence")
    assert p.degenerate and a.intersect(p, "x").lower == 0.3
    assert a.intersect(LengthInterval.point(2.0, "c"), "x").is_empty
    with pytest.raises(ValueError):
        LengthInterval.empty("safe").midpoint


def test_export_region_boundaries(tmp_path):
    path = export_region_boundaries(tmp_path / "b.csv", 0.4, P30, 21)
    rows = list(csv.DictReader(path.open()))
    assert set(rows[0]) == {"region", "branch", "x", "xdot"}
    assert {r["region"] for r in rows} == {"S", "mu_h", "xdot_cr", "D", "A"}
