import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from slipstep.lip_core import (ParameterError, StepState, apply_push, fixed_point,
                               flow, make_params, orbit_energy, step_map,
                               transition_matrix)

W = math.sqrt(9.8)
NOMINAL = StepState(-0.2, 1.1274)

finite = st.floats(-2.0, 2.0, allow_nan=False)
times = st.floats(0.05, 2.0)
omegas = st.floats(0.5, 10.0)


def test_make_params_omega():
    assert make_params(9.8, 1.0, 0.21, 50, 0.4, 0.4).omega == pytest.approx(3.13050, abs=1e-5)
    nao = make_params(9.8, 0.22, 0.15, 5, 0.05, 0.6)
    assert nao.omega == pytest.approx(6.674, abs=1e-3)
    assert nao.omega ** 2 * nao.h == pytest.approx(nao.g, rel=1e-15)


@pytest.mark.parametrize("field", ["g", "h", "mu", "mass", "T_star"])
def test_make_params_rejects_nonpositive(field):
    kwargs = dict(g=9.8, h=1.0, mu=0.21, mass=50, L_star=0.4, T_star=0.4)
    kwargs[field] = 0.0
    with pytest.raises(ParameterError, match=f"{field} must be positive"):
        make_params(**kwargs)


def test_replace_recomputes_omega():
    p = make_params().replace(h=2.0)
    assert p.omega == pytest.approx(math.sqrt(4.9))


def test_flow_identity_and_equilibrium():
    assert flow(NOMINAL, 0.0, W) == NOMINAL
    assert flow(StepState(0.0, 0.0), 0.7, W) == StepState(0.0, 0.0)
    with pytest.raises(ParameterError):
        flow(NOMINAL, -0.1, W)


def test_flow_against_numerical_integration():
    sol = solve_ivp(lambda t, y: [y[1], W * W * y[0]], (0, 0.4), [-0.2, 1.1274],
                    method="DOP853", rtol=1e-12, atol=1e-12)
    end = flow(NOMINAL, 0.4, W)
    assert end.x0 == pytest.approx(sol.y[0, -1], abs=1e-6)
    assert end.xdot0 == pytest.approx(sol.y[1, -1], abs=1e-6)
    assert end.x0 == pytest.approx(0.2, abs=1e-4)


def test_transition_matrix_values():
    A = transition_matrix(0.4, 3.13050)
    wT = 3.13050 * 0.4
    assert A.a11 == pytest.approx(1.8920, abs=1e-4)
    assert A.a12 == pytest.approx(0.5131, abs=1e-4)
    assert A.a21 == pytest.approx(5.0280, abs=5e-4)
    assert A.a11 == pytest.approx(math.cosh(wT), rel=1e-14)
    assert A.a12 == pytest.approx(math.sinh(wT) / 3.13050, rel=1e-14)
    eig = np.sort(np.linalg.eigvals(A.as_array()).real)
    assert eig == pytest.approx([math.exp(-wT), math.exp(wT)], rel=1e-12)


def test_transition_matrix_small_T_tends_to_identity():
    A = transition_matrix(1e-12, 5.0)
    assert A.as_array() == pytest.approx(np.eye(2), abs=1e-8)
    with pytest.raises(ParameterError):
        transition_matrix(0.0, 5.0)


def test_step_map_examples():
    out = step_map(NOMINAL, 0.4, 0.4, 3.13050)
    assert out.x0 == pytest.approx(-0.2, abs=1e-4)
    assert out.xdot0 == pytest.approx(1.1274, abs=5e-4)
    assert step_map(StepState(0, 0), 0.1, 0.4, W) == StepState(-0.1, 0.0)


def test_fixed_point_examples():
    fp = fixed_point(0.4, 0.4, W)
    assert fp.x0 == -0.2
    assert fp.xdot0 == pytest.approx(1.1274, abs=5e-4)
    assert fixed_point(0.0, 0.5, 3.0) == StepState(0.0, 0.0)
    nao = fixed_point(0.05, 0.6, math.sqrt(9.8 / 0.22))
    assert (nao.x0, nao.xdot0) == pytest.approx((-0.025, 0.173), abs=5e-4)


def test_gravity_choice_reproduces_nominal_velocity():
    assert fixed_point(0.4, 0.4, math.sqrt(9.8)).xdot0 == pytest.approx(1.1274, abs=1e-4)
    assert abs(fixed_point(0.4, 0.4, math.sqrt(9.81)).xdot0 - 1.1274) > 1e-4


def test_apply_push():
    assert apply_push(NOMINAL, 30, 50) == StepState(-0.2, pytest.approx(1.7274))
    assert apply_push(NOMINAL, 9, 50).xdot0 == pytest.approx(1.3074)
    assert apply_push(NOMINAL, 0, 50) == NOMINAL
    with pytest.raises(ParameterError):
        apply_push(NOMINAL, 1.0, 0.0)


@settings(max_examples=300, deadline=None)
@given(times, omegas)
def test_matrix_invariants(T, w):
    A = transition_matrix(T, w)
    assert min(A.a11, A.a12, A.a21, A.a22) > 0
    assert A.a11 == A.a22
    assert A.a11 ** 2 - A.a12 * A.a21 == pytest.approx(1.0, abs=1e-10 * A.a11 ** 2)


@settings(max_examples=200, deadline=None)
@given(finite, finite, st.floats(0, 1), st.floats(0, 1), omegas)
def test_flow_semigroup(x, v, t1, t2, w):
    s = StepState(x, v)
    a = flow(flow(s, t1, w), t2, w)
    b = flow(s, t1 + t2, w)
    scale = max(1.0, abs(b.x0), abs(b.xdot0 / w))
    assert abs(a.x0 - b.x0) <= 1e-10 * scale
    assert abs(a.xdot0 - b.xdot0) <= 1e-10 * scale * w


@settings(max_examples=200, deadline=None)
@given(finite, finite, st.floats(0, 1.5), omegas)
def test_orbit_energy_conserved(x, v, t, w):
    s = StepState(x, v)
    e0, e1 = orbit_energy(s, w), orbit_energy(flow(s, t, w), w)
    end = flow(s, t, w)
    scale = end.xdot0 ** 2 + (w * end.x0) ** 2 + 1e-12
    assert abs(e1 - e0) <= 1e-9 * scale


@settings(max_examples=200, deadline=None)
@given(st.floats(-1, 1), times, omegas)
def test_fixed_point_property(L, T, w):
    fp = fixed_point(L, T, w)
    nxt = step_map(fp, L, T, w)
    scale = max(1.0, abs(fp.xdot0), math.exp(w * T) * abs(L))
    assert abs(nxt.x0 - fp.x0) <= 1e-10 * scale
    assert abs(nxt.xdot0 - fp.xdot0) <= 1e-10 * scale


def test_open_loop_instability_along_unstable_eigenvector():
    w, T, L = W, 0.4, 0.4
    fp = fixed_point(L, T, w)
    d = 1e-6 * np.array([1.0, w])  # eigenvector of e^{wT}
    s = StepState(fp.x0 + d[0], fp.xdot0 + d[1])
    nxt = step_map(s, L, T, w)
    growth = (nxt - fp).norm() / np.linalg.norm(d)
    assert growth == pytest.approx(math.exp(w * T), rel=1e-6)
