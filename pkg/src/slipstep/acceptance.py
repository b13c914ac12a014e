"""Acceptance checks, one function per criterion.

Each check returns a ``CriterionResult``; ``run_all`` evaluates a selection and
``format_line`` renders the one-line pass/fail summary.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .controllers import (Mode, Target, convergence_roots, lyapunov,
                          step_length_command)
from .friction_safety import (classify_state, critical_velocity,
                              safe_length_range)
from .lip_core import (StepState, fixed_point, make_params, step_map,
                       transition_matrix)
from .simulator import (gait_switch_scenario, push_scenario, run,
                        time_adjusted_steps, transient_step_count)

SEED = 20240601


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str


def format_line(r: CriterionResult) -> str:
    return f"[{'PASS' if r.passed else 'FAIL'}] {r.number:2d} {r.name}: {r.detail}"


# ------------------------------------------------------------ sampling

def _random_gait(rng, min_wT=0.5):
    """Gait with T in [0.1, 1], omega in [1, 8], omega T >= min_wT, fixed point in S."""
    while True:
        w = rng.uniform(1.0, 8.0)
        T = rng.uniform(0.1, 1.0)
        if w * T < min_wT:
            continue
        mu = rng.uniform(0.05, 1.5)
        h = 9.8 / w ** 2
        p = make_params(h=h, mu=mu, L_star=rng.uniform(-2.0, 2.0) * mu * h, T_star=T)
        if classify_state(fixed_point(p.L_star, T, p.omega), T, p).in_S:
            return p


def _random_safe_state(rng, p):
    """Uniform in x over (-mu h, mu h), then uniform over that x's S strip."""
    A = transition_matrix(p.T_star, p.omega)
    while True:
        x = rng.uniform(-1.0, 1.0) * p.mu_h
        lo = (-A.a11 * x - p.mu_h) / A.a12
        hi = (-A.a11 * x + p.mu_h) / A.a12
        s = StepState(x, rng.uniform(lo, hi))
        if classify_state(s, p.T_star, p).in_S:
            return s


# ------------------------------------------------------------ criteria

def c01_fixed_point():
    s = fixed_point(0.4, 0.4, math.sqrt(9.8))
    ok = s.x0 == -0.2 and abs(s.xdot0 - 1.1274) < 5e-4
    return CriterionResult(1, "fixed-point reproduction", ok,
                           f"x0*=[{s.x0:.4f}, {s.xdot0:.6f}] vs [-0.2, 1.1274]")


def c02_eigenvalues(n=100):
    rng = np.random.default_rng(SEED + 2)
    worst = 0.0
    for _ in range(n):
        T, w = rng.uniform(0.1, 1.0), rng.uniform(1.0, 8.0)
        ev = np.sort(np.linalg.eigvals(transition_matrix(T, w).as_array()).real)
        ref = np.array([math.exp(-w * T), math.exp(w * T)])
        # relative to the spectral radius: the small eigenvalue of the rounded
        # matrix is itself only known to ~eps * e^(2 w T) relative
        worst = max(worst, float(np.max(np.abs(ev - ref)) / ref[1]))
    return CriterionResult(2, "eigenvalue identity", worst < 1e-10,
                           f"max err / spectral radius {worst:.2e} over {n} (T, omega)")


def c03_matrix_properties(n=1000):
    rng = np.random.default_rng(SEED + 3)
    worst_sym = worst_det = 0.0
    positive = True
    for _ in range(n):
        A = transition_matrix(rng.uniform(0.1, 1.0), rng.uniform(1.0, 8.0))
        positive &= min(A.a11, A.a12, A.a21, A.a22) > 0
        worst_sym = max(worst_sym, abs(A.a11 - A.a22) / A.a11)
        # cosh^2 - sinh^2 cancels; scale the error by the size of the terms
        det_err = abs(A.a11 * A.a22 - A.a12 * A.a21 - 1.0) / (A.a11 * A.a22)
        worst_det = max(worst_det, det_err)
    ok = positive and worst_sym < 1e-10 and worst_det < 1e-10
    return CriterionResult(3, "transition-matrix properties", ok,
                           f"positive={positive}, |a11-a22| rel {worst_sym:.1e}, "
                           f"|det-1| rel {worst_det:.1e}")


def c04_safe_region_oracle(n=100_000, n_grid=2000, batch=2000):
    """Analytic S membership against a dense time-grid of the closed-form flow."""
    rng = np.random.default_rng(SEED + 4)
    agree = band = outside = 0
    tau = np.linspace(0.0, 1.0, n_grid + 1)
    for start in range(0, n, batch):
        m = min(batch, n - start)
        w = rng.uniform(1.0, 8.0, m)
        T = rng.uniform(0.1, 1.0, m)
        mu = rng.uniform(0.05, 1.5, m)
        h = 9.8 / w ** 2
        mh = mu * h
        ch, sh = np.cosh(w * T), np.sinh(w * T)
        vcr = (ch + 1.0) / (sh / w) * mh
        x0 = rng.uniform(-1.2, 1.2, m) * mh
        v0 = rng.uniform(-1.2, 1.2, m) * vcr
        tt = T[:, None] * tau[None, :]
        wt = w[:, None] * tt
        x = np.cosh(wt) * x0[:, None] + np.sinh(wt) / w[:, None] * v0[:, None]
        peak = np.max(np.abs(x), axis=1)
        brute = peak < mh
        for k in range(m):
            p = make_params(h=h[k], mu=mu[k], T_star=T[k])
            analytic = classify_state(StepState(x0[k], v0[k]), T[k], p).in_S
            if analytic == brute[k]:
                agree += 1
            elif abs(peak[k] - mh[k]) <= 1e-6 * mh[k]:
                band += 1
            else:
                outside += 1
    frac = agree / n
    ok = frac >= 0.9999 and outside == 0
    return CriterionResult(4, "safe-region oracle equivalence", ok,
                           f"agreement {frac:.6f} on {n} states, {band} in the "
                           f"boundary band, {outside} outside it")


def c05_recursive_feasibility(n=10_000):
    rng = np.random.default_rng(SEED + 5)
    bad = 0
    for _ in range(n):
        p = _random_gait(rng)
        s = _random_safe_state(rng, p)
        rng_L = safe_length_range(s, p.T_star, p)
        L = rng_L.lower + rng.uniform(0.0, 1.0) * rng_L.width
        if not rng_L.contains(L):
            L = rng_L.midpoint
        nxt = step_map(s, L, p.T_star, p.omega)
        if not classify_state(nxt, p.T_star, p).in_S or safe_length_range(nxt, p.T_star, p).is_empty:
            bad += 1
    return CriterionResult(5, "recursive feasibility of the safe range", bad == 0,
                           f"{bad} counterexamples in {n}")


def c06_lyapunov_convergence(n=10_000, max_steps=200, tol=1e-6):
    rng = np.random.default_rng(SEED + 6)
    increases = slow = 0
    worst_steps = 0
    for _ in range(n):
        p = _random_gait(rng)
        s = _random_safe_state(rng, p)
        fp = fixed_point(p.L_star, p.T_star, p.omega)
        V = lyapunov(s - fp, p.T_star, p.omega)
        for k in range(max_steps + 1):
            if (s - fp).norm() < tol:
                break
            if k == max_steps:
                slow += 1
                break
            s = step_map(s, step_length_command(s, p), p.T_star, p.omega)
            V_next = lyapunov(s - fp, p.T_star, p.omega)
            if V_next > V * (1.0 + 1e-9) + 1e-15:
                increases += 1
            V = V_next
        worst_steps = max(worst_steps, k)
    ok = increases == 0 and slow == 0
    return CriterionResult(6, "Lyapunov convergence of the step-length law", ok,
                           f"{increases} V increases, {slow} runs above {max_steps} steps, "
                           f"slowest {worst_steps} steps, n={n}")


def c07_safe_convergence(n=10_000):
    rng = np.random.default_rng(SEED + 7)
    bad = 0
    for _ in range(n):
        p = _random_gait(rng)
        s = _random_safe_state(rng, p)
        safe = safe_length_range(s, p.T_star, p)
        if safe.is_empty:
            continue
        _, dL2 = convergence_roots(s - fixed_point(p.L_star, p.T_star, p.omega),
                                   p.T_star, p.omega)
        if not safe.contains(dL2 + p.L_star):
            bad += 1
    return CriterionResult(7, "safe-convergence range never empty", bad == 0,
                           f"{bad} counterexamples in {n}")


def c08_gait_switch():
    counts, notes, ok = [], [], True
    for mu in (0.21, 0.4, 1.5):
        tr = run(gait_switch_scenario(mu))
        peak = float(tr.mu_r.max())
        good = (tr.outcome == "converged" and peak < mu - 1e-6
                and tr.records[-1].params.L_star == -0.4)
        ok &= good
        counts.append(transient_step_count(tr) if tr.outcome == "converged" else None)
        notes.append(f"mu={mu}: {tr.outcome}, peak mu_r {peak:.4f}, transient {counts[-1]}")
    ordered = None not in counts and counts[0] >= counts[1] >= counts[2]
    return CriterionResult(8, "gait-switch triptych", ok and ordered, "; ".join(notes))


def c09_height():
    low = run(gait_switch_scenario(0.21, h=1.0))
    tall = run(gait_switch_scenario(0.21, h=1.3))
    ok = (tall.peak_mu_r < low.peak_mu_r and low.outcome == tall.outcome == "converged")
    return CriterionResult(9, "height effect", ok,
                           f"peak mu_r {low.peak_mu_r:.5f} at h=1.0, {tall.peak_mu_r:.5f} at h=1.3")


def c10_push_triptych(mu=0.3):
    runs = {F: run(push_scenario(F, mu=mu)) for F in (9, 30, 45)}
    no_slip = all(float(tr.mu_r.max()) < mu - 1e-6 for tr in runs.values())
    conv = all(tr.outcome == "converged" for tr in runs.values())

    a = runs[9]
    ok9 = all(m is Mode.NOMINAL for m in a.modes) and all(r.command.T == r.params.T_star
                                                          for r in a.records)
    b = runs[30].modes
    fb = [k for k, m in enumerate(b) if m is Mode.FIXED_BORDER]
    ok30 = bool(fb) and all(m is Mode.NOMINAL for m in b[fb[-1] + 1:]) and \
        Mode.MOVING_BORDER not in b
    c = runs[45]
    zero = [k for k, r in enumerate(c.records) if r.command.target is Target.ZERO]
    ok45 = (bool(zero) and c.records[zero[0]].command.mode is Mode.MOVING_BORDER
            and all(r.command.target is Target.PRIMARY and r.command.T == r.params.T_star
                    for r in c.records[zero[-1] + 1:]))
    ok = no_slip and conv and ok9 and ok30 and ok45
    detail = (f"F=9 nominal-only {ok9}; F=30 fixed_border then nominal {ok30}; "
              f"F=45 zero-gait interlude then restored {ok45} "
              f"({time_adjusted_steps(c)} adjusted steps); no slip {no_slip}")
    return CriterionResult(10, "push triptych", ok, detail)


def c11_spot_checks():
    p = make_params(mu=0.3, L_star=0.4, T_star=0.4)
    a = classify_state(StepState(-0.2, 1.7274), 0.4, p).in_A
    b = classify_state(StepState(-0.2, 2.0274), 0.4, p).in_A
    return CriterionResult(11, "derived-value spot checks", a and not b,
                           f"[-0.2, 1.7274] in A: {a}; [-0.2, 2.0274] in A: {b}; "
                           f"xdot_cr={critical_velocity(0.4, p):.6f}")


# ------------------------------------------------------------ 6-DoF

@functools.lru_cache(maxsize=None)
def nominal_walk(n_steps=10):
    from .planar6dof.model import load_model
    from .planar6dof.scenario import FullScenario, nominal_params, run_full_scenario
    m = load_model()
    return run_full_scenario(m, nominal_params(m), FullScenario(n_steps=n_steps))


@functools.lru_cache(maxsize=None)
def push_walk(n_steps=16, impulse=0.3):
    """Returns (trace, report, joint_log, abort message or None)."""
    from .planar6dof.model import load_model
    from .planar6dof.scenario import (FullScenario, ScenarioAbort,
                                      nominal_params, run_full_scenario)
    m = load_model()
    sc = FullScenario(n_steps=n_steps, push_step=4, push_impulse=impulse)
    try:
        return (*run_full_scenario(m, nominal_params(m), sc), None)
    except ScenarioAbort as exc:
        return (*exc.partial, str(exc))


def sixdof_model_checks(n=1000):
    """Inertia matrix, energy balance and impact bookkeeping; returns a dict."""
    from .planar6dof import model as md
    m = md.load_model()
    rng = np.random.default_rng(SEED + 12)
    sym = 0.0
    min_eig = math.inf
    for _ in range(n):
        q = rng.uniform(-math.pi, math.pi, 6)
        M = md.mass_matrix(m, q)
        sym = max(sym, float(np.abs(M - M.T).max()))
        min_eig = min(min_eig, float(np.linalg.eigvalsh(M).min()))

    # energy: augment the state with the applied work and integrate both by RK4
    q0 = np.array([1.3, 0.8, -0.2, -0.9, 0.05, 1.5])

    def tau(t):
        return 0.3 * np.sin(np.arange(1, 7) * 3.0 * t + 0.4)

    def f(t, z):
        q, qd = z[:6], z[6:12]
        u = tau(t)
        return np.concatenate([qd, md.dynamics(m, q, qd, u), [u @ qd]])

    z = np.concatenate([q0, np.zeros(6), [0.0]])
    E0 = md.energy(m, q0, np.zeros(6))
    dt, t = 1e-4, 0.0
    for _ in range(2000):
        k1 = f(t, z)
        k2 = f(t + dt / 2, z + dt / 2 * k1)
        k3 = f(t + dt / 2, z + dt / 2 * k2)
        k4 = f(t + dt, z + dt * k3)
        z = z + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += dt
    dE = md.energy(m, z[:6], z[6:12]) - E0
    energy_rel = abs(dE - z[12]) / max(abs(z[12]), 1e-12)

    q_push = np.array([1.32, 0.88, -0.25, -0.94, 0.0, math.pi / 2])
    qd_push = rng.normal(scale=0.5, size=6)
    ankle = (0.0, m.ankle_height)
    qd_plus = md.impact(m, q_push, qd_push, 0.3)
    dH = md.angular_momentum(m, q_push, qd_plus, ankle) - md.angular_momentum(m, q_push, qd_push, ankle)
    mid, _, _ = md.point_state(m, "torso_mid", q_push)
    expected = -(mid[1] - ankle[1]) * 0.3
    impact_rel = abs(dH - expected) / abs(expected)
    return {"sym": sym, "min_eig": min_eig, "energy_rel": energy_rel, "impact_rel": impact_rel}


def c12_sixdof():
    chk = sixdof_model_checks()
    model_ok = chk["sym"] < 1e-10 and chk["min_eig"] > 0 and chk["energy_rel"] < 1e-6 \
        and chk["impact_rel"] < 1e-9
    trace, rep, _ = nominal_walk()
    walk_ok = trace.outcome in ("converged", "running") and len(trace.records) == 10 and \
        rep.holds(0.15)
    ptrace, prep, _, abort = push_walk()
    modes = [r.command.mode for r in ptrace.records]
    push_mb = Mode.MOVING_BORDER in modes
    push_ok = push_mb and abort is None and ptrace.outcome == "converged"
    detail = (f"M sym {chk['sym']:.1e}, min eig {chk['min_eig']:.2e}, energy rel "
              f"{chk['energy_rel']:.1e}, impact rel {chk['impact_rel']:.1e}; nominal walk "
              f"mu_r {rep.peak_mu_r:.4f}, fn>={rep.min_fn:.2f}, CoP [{rep.cop_min:.4f}, "
              f"{rep.cop_max:.4f}], touchdown {rep.max_touchdown_speed:.1e}; push modes "
              f"{[mm.value for mm in modes[3:6]]}, moving_border={push_mb}, "
              f"outcome {ptrace.outcome}{'' if abort is None else ' (' + abort + ')'}")
    return CriterionResult(12, "6-DoF suite", model_ok and walk_ok and push_ok, detail)


CRITERIA: dict[int, Callable[[], CriterionResult]] = {
    1: c01_fixed_point, 2: c02_eigenvalues, 3: c03_matrix_properties,
    4: c04_safe_region_oracle, 5: c05_recursive_feasibility,
    6: c06_lyapunov_convergence, 7: c07_safe_convergence,
    8: c08_gait_switch, 9: c09_height, 10: c10_push_triptych,
    11: c11_spot_checks, 12: c12_sixdof,
}


def run_all(selection=None) -> list[CriterionResult]:
    return [CRITERIA[k]() for k in sorted(selection or CRITERIA)]
