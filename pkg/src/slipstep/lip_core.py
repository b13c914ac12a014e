"""Linear inverted pendulum (LIP) step-to-step dynamics.

The CoM coordinate ``x`` is always measured relative to the CoP of the
current stance foot, so a step-initial state is ``(x0, xdot0)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_GRAVITY = 9.8  # m/s^2, reproduces the 1.1274 m/s nominal velocity


class ParameterError(ValueError):
    """A physical parameter is out of its admissible range."""


@dataclass(frozen=True)
class StepState:
    x0: float  # m, CoM minus CoP
    xdot0: float  # m/s

    def as_array(self) -> np.ndarray:
        return np.array([self.x0, self.xdot0])

    @classmethod
    def from_array(cls, v) -> "StepState":
        return cls(float(v[0]), float(v[1]))

    def __sub__(self, other: "StepState") -> "StepState":
        return StepState(self.x0 - other.x0, self.xdot0 - other.xdot0)

    def norm(self) -> float:
        return math.hypot(self.x0, self.xdot0)


@dataclass(frozen=True)
class GaitParams:
    g: float
    h: float
    mu: float
    mass: float
    L_star: float
    T_star: float

    @property
    def omega(self) -> float:
        return math.sqrt(self.g / self.h)

    @property
    def mu_h(self) -> float:
        """Largest admissible |x| before the stance foot slips."""
        return self.mu * self.h

    def replace(self, **changes) -> "GaitParams":
        fields = dict(g=self.g, h=self.h, mu=self.mu, mass=self.mass,
                      L_star=self.L_star, T_star=self.T_star)
        fields.update(changes)
        return make_params(**fields)


def make_params(g: float = DEFAULT_GRAVITY, h: float = 1.0, mu: float = 0.4,
                mass: float = 50.0, L_star: float = 0.4,
                T_star: float = 0.4) -> GaitParams:
    for name, value in (("g", g), ("h", h), ("mu", mu), ("mass", mass),
                        ("T_star", T_star)):
        if not math.isfinite(value) or value <= 0:
            raise ParameterError(f"{name} must be positive, got {value!r}")
    if not math.isfinite(L_star):
        raise ParameterError(f"L_star must be finite, got {L_star!r}")
    return GaitParams(float(g), float(h), float(mu), float(mass),
                      float(L_star), float(T_star))


@dataclass(frozen=True)
class StepMatrix:
    a11: float
    a12: float
    a21: float
    a22: float

    @property
    def b(self) -> np.ndarray:
        return np.array([-1.0, 0.0])

    def as_array(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a21, self.a22]])

    def apply(self, x0: float, xdot0: float) -> tuple[float, float]:
        return (self.a11 * x0 + self.a12 * xdot0,
                self.a21 * x0 + self.a22 * xdot0)


def _check_time(t: float, name: str, strict: bool) -> None:
    if not math.isfinite(t) or t < 0 or (strict and t == 0):
        bound = "positive" if strict else "non-negative"
        raise ParameterError(f"{name} must be {bound}, got {t!r}")


def _hyperbolic(omega: float, t: float) -> tuple[float, float]:
    ep = math.exp(omega * t)
    em = math.exp(-omega * t)
    return 0.5 * (ep + em), 0.5 * (ep - em)


def flow(s: StepState, t: float, omega: float) -> StepState:
    """Closed-form single-support solution of xddot = omega^2 x at time t."""
    _check_time(t, "t", strict=False)
    if t == 0:
        return s
    ch, sh = _hyperbolic(omega, t)
    return StepState(ch * s.x0 + sh / omega * s.xdot0,
                     omega * sh * s.x0 + ch * s.xdot0)


def flow_samples(s: StepState, times: np.ndarray, omega: float
                 ) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised ``flow`` over an array of times (x, xdot)."""
    t = np.asarray(times, dtype=float)
    ep = np.exp(omega * t)
    em = np.exp(-omega * t)
    ch = 0.5 * (ep + em)
    sh = 0.5 * (ep - em)
    return ch * s.x0 + sh / omega * s.xdot0, omega * sh * s.x0 + ch * s.xdot0


def transition_matrix(T: float, omega: float) -> StepMatrix:
    _check_time(T, "T", strict=True)
    ch, sh = _hyperbolic(omega, T)
    return StepMatrix(ch, sh / omega, omega * sh, ch)


def step_map(s: StepState, L: float, T: float, omega: float) -> StepState:
    """Initial state of the next step after a step of length L and time T."""
    A = transition_matrix(T, omega)
    x, xdot = A.apply(s.x0, s.xdot0)
    return StepState(x - L, xdot)


def fixed_point(L_star: float, T_star: float, omega: float) -> StepState:
    _check_time(T_star, "T_star", strict=True)
    e = math.exp(omega * T_star)
    return StepState(-0.5 * L_star, 0.5 * L_star * omega * (e + 1.0) / (e - 1.0))


def apply_push(s: StepState, impulse: float, mass: float) -> StepState:
    """Instantaneous horizontal impulse (kg m/s) applied at the CoM."""
    if mass <= 0:
        raise ParameterError(f"mass must be positive, got {mass!r}")
    return StepState(s.x0, s.xdot0 + impulse / mass)


def orbit_energy(s: StepState, omega: float) -> float:
    """xdot^2 - omega^2 x^2, constant along the single-support flow."""
    return s.xdot0 ** 2 - (omega * s.x0) ** 2
