"""Deterministic step-by-step scenario engine on the LIP.

Each step i (1-based) does, in order: apply the events scheduled for step i,
ask the supervisor for (L, T), sample the single-support flow over [0, T],
then jump to the next stance foot with ``step_map``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .controllers import Mode, StepCommand, SupervisorState, Target, supervise
from .friction_safety import extremum, required_friction
from .lip_core import (GaitParams, ParameterError, StepState, apply_push,
                       fixed_point, flow_samples, make_params, step_map)

EVENT_KINDS = ("push", "switch_gait", "set_height")
CONVERGENCE_TOL = 1e-6
CONVERGENCE_HOLD = 5


class ConfigError(ValueError):
    """Malformed or inconsistent scenario description."""


@dataclass(frozen=True)
class Event:
    at_step: int
    kind: str
    impulse: float = 0.0
    L_star: Optional[float] = None
    T_star: Optional[float] = None
    h: Optional[float] = None

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ConfigError(f"unknown event kind {self.kind!r}")
        if int(self.at_step) != self.at_step or self.at_step < 1:
            raise ConfigError(f"event step index must be an integer >= 1, got {self.at_step!r}")
        if self.kind == "switch_gait" and (self.L_star is None or self.T_star is None):
            raise ConfigError("switch_gait needs both L_star and T_star")
        if self.kind == "set_height" and self.h is None:
            raise ConfigError("set_height needs h")

    def apply(self, s: StepState, params: GaitParams) -> tuple[StepState, GaitParams]:
        if self.kind == "push":
            return apply_push(s, self.impulse, params.mass), params
        if self.kind == "switch_gait":
            return s, params.replace(L_star=self.L_star, T_star=self.T_star)
        return s, params.replace(h=self.h)


@dataclass(frozen=True)
class ScenarioConfig:
    params: GaitParams
    initial: StepState
    events: tuple = ()
    n_steps: int = 20
    sample_dt: Optional[float] = None  # None: T*/200 of the initial gait

    def __post_init__(self):
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ConfigError(f"n_steps must be a positive integer, got {self.n_steps!r}")
        if self.sample_dt is not None and not self.sample_dt > 0:
            raise ConfigError(f"sample_dt must be positive, got {self.sample_dt!r}")
        object.__setattr__(self, "events", tuple(self.events))

    @property
    def dt(self) -> float:
        return self.sample_dt if self.sample_dt is not None else self.params.T_star / 200.0


@dataclass(frozen=True)
class StepRecord:
    index: int
    state_before: StepState
    state_after_events: StepState
    command: StepCommand
    mu_r_peak: float
    params: GaitParams  # gait in effect for this step, after its events


@dataclass
class Trace:
    records: list = field(default_factory=list)
    t: np.ndarray = field(default_factory=lambda: np.zeros(0))
    step: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    x: np.ndarray = field(default_factory=lambda: np.zeros(0))
    xdot: np.ndarray = field(default_factory=lambda: np.zeros(0))
    mu_r: np.ndarray = field(default_factory=lambda: np.zeros(0))
    outcome: str = "running"
    final_state: Optional[StepState] = None

    @property
    def modes(self) -> list:
        return [r.command.mode for r in self.records]

    @property
    def peak_mu_r(self) -> float:
        return max((r.mu_r_peak for r in self.records), default=0.0)


def _error_to_gait(s: StepState, params: GaitParams) -> float:
    return (s - fixed_point(params.L_star, params.T_star, params.omega)).norm()


def _step_samples(s, T, dt, omega):
    n = max(1, int(math.ceil(T / dt - 1e-9)))
    times = np.linspace(0.0, T, n + 1)
    x, xdot = flow_samples(s, times, omega)
    return times, x, xdot


def run(config: ScenarioConfig) -> Trace:
    params = config.params
    s = config.initial
    sup = SupervisorState()
    by_step: dict[int, list] = {}
    for ev in config.events:
        by_step.setdefault(int(ev.at_step), []).append(ev)

    trace = Trace()
    chunks = {k: [] for k in ("t", "step", "x", "xdot", "mu_r")}
    clock = 0.0
    outcome = "running"
    for i in range(1, config.n_steps + 1):
        before = s
        for ev in by_step.get(i, ()):
            s, params = ev.apply(s, params)
        cmd, sup = supervise(s, sup, params)
        if cmd.mode is Mode.UNRECOVERABLE:
            trace.records.append(StepRecord(i, before, s, cmd, float(abs(s.x0) / params.h), params))
            outcome = "unrecoverable"
            break

        times, x, xdot = _step_samples(s, cmd.T, config.dt, params.omega)
        mu_r = required_friction(x, params.h)
        peak = float(np.max(mu_r))
        ext = extremum(s, params.omega)
        if ext is not None and 0.0 < ext[0] < cmd.T:
            peak = max(peak, abs(ext[1]) / params.h)

        chunks["t"].append(clock + times)
        chunks["step"].append(np.full(times.shape, i))
        chunks["x"].append(x)
        chunks["xdot"].append(xdot)
        chunks["mu_r"].append(mu_r)
        trace.records.append(StepRecord(i, before, s, cmd, peak, params))
        clock += cmd.T
        if not peak < params.mu:
            outcome = "slipped"
            break
        s = step_map(s, cmd.L, cmd.T, params.omega)

    trace.final_state = s
    for key, parts in chunks.items():
        if parts:
            setattr(trace, key, np.concatenate(parts))
    if outcome == "running" and _settled(trace, s, params, sup):
        outcome = "converged"
    trace.outcome = outcome
    return trace


def _settled(trace, s_final, params, sup, tol=CONVERGENCE_TOL, hold=CONVERGENCE_HOLD) -> bool:
    if sup.active_target is not Target.PRIMARY:
        return False
    tail = [r.state_after_events for r in trace.records[-(hold - 1):]] + [s_final]
    if len(trace.records) < hold - 1:
        return False
    return all(_error_to_gait(st, params) < tol for st in tail)


def transient_step_count(trace: Trace, tol: float = CONVERGENCE_TOL) -> int:
    """Steps spent away from the gait in effect.

    Counts the records from the first one whose start-of-step error exceeds
    ``tol`` to the last such record. A run resting on its fixed point gives 0.
    """
    if trace.outcome != "converged":
        raise ValueError(f"transient count needs a converged trace, outcome is {trace.outcome!r}")
    off = [k for k, r in enumerate(trace.records)
           if _error_to_gait(r.state_after_events, r.params) >= tol
           or r.params.T_star != r.command.T]
    return 0 if not off else off[-1] - off[0] + 1


def time_adjusted_steps(trace: Trace) -> int:
    return sum(1 for r in trace.records
               if r.command.mode in (Mode.FIXED_BORDER, Mode.MOVING_BORDER))


# ---------------------------------------------------------------- file I/O

def _state_dict(s: StepState) -> dict:
    return {"x0": s.x0, "xdot0": s.xdot0}


def _record_dict(r: StepRecord) -> dict:
    return {
        "index": r.index,
        "state_before": _state_dict(r.state_before),
        "state_after_events": _state_dict(r.state_after_events),
        "L": r.command.L, "T": r.command.T,
        "mode": r.command.mode.value, "target": r.command.target.value,
        "mu_r_peak": r.mu_r_peak,
        "params": {"g": r.params.g, "h": r.params.h, "mu": r.params.mu,
                   "mass": r.params.mass, "L_star": r.params.L_star,
                   "T_star": r.params.T_star},
    }


def export_trace(trace: Trace, out_dir) -> dict:
    """Write samples.csv, steps.csv and summary.json into ``out_dir``.

    Floats are written with ``repr`` so identical runs give identical bytes.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = {"samples": out / "samples.csv", "steps": out / "steps.csv",
                 "summary": out / "summary.json"}
        with paths["samples"].open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "t", "x", "xdot", "mu_r"])
            for row in zip(trace.step, trace.t, trace.x, trace.xdot, trace.mu_r):
                w.writerow([int(row[0])] + [repr(float(v)) for v in row[1:]])
        with paths["steps"].open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "L", "T", "mode", "mu_r_peak"])
            for r in trace.records:
                w.writerow([r.index, repr(r.command.L), repr(r.command.T),
                            r.command.mode.value, repr(r.mu_r_peak)])
        summary = {"outcome": trace.outcome,
                   "final_state": None if trace.final_state is None
                   else _state_dict(trace.final_state),
                   "records": [_record_dict(r) for r in trace.records]}
        paths["summary"].write_text(json.dumps(summary, indent=1) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write trace to {out}: {exc}") from exc
    return paths


def load_trace_summary(path) -> tuple[str, list]:
    """Parse summary.json back into (outcome, [StepRecord, ...])."""
    data = json.loads(Path(path).read_text())
    records = []
    for d in data["records"]:
        p = d["params"]
        records.append(StepRecord(
            index=d["index"],
            state_before=StepState(**d["state_before"]),
            state_after_events=StepState(**d["state_after_events"]),
            command=StepCommand(d["L"], d["T"], Mode(d["mode"]), Target(d["target"])),
            mu_r_peak=d["mu_r_peak"],
            params=GaitParams(**p)))
    return data["outcome"], records


# ------------------------------------------------------------ scenario files

_TOP_KEYS = {"params", "initial", "events", "n_steps", "sample_dt"}
_PARAM_KEYS = {"g", "h", "mu", "mass", "L_star", "T_star"}
_EVENT_KEYS = {"at_step", "kind", "impulse", "L_star", "T_star", "h"}


def _reject_unknown(found, allowed, where):
    extra = sorted(set(found) - allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(extra)}")


def _coerce(text: str):
    value = yaml.safe_load(text)
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError(f"override value must be numeric, got {text!r}")
    return value


def apply_overrides(raw: dict, overrides) -> dict:
    """``key=value`` overrides; bare gait keys (``mu=0.3``) address params."""
    raw = dict(raw)
    raw["params"] = dict(raw.get("params") or {})
    for item in overrides or ():
        key, sep, text = item.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        if key.startswith("params."):
            key = key[len("params."):]
        if key in _PARAM_KEYS:
            raw["params"][key] = _coerce(text)
        elif key in ("n_steps", "sample_dt"):
            raw[key] = _coerce(text)
        elif key in ("x0", "xdot0"):
            init = raw.get("initial")
            init = dict(init) if isinstance(init, dict) else {}
            init[key] = _coerce(text)
            raw["initial"] = init
        else:
            raise ConfigError(f"unknown override key {key!r}")
    return raw


def config_from_dict(raw: dict) -> ScenarioConfig:
    if not isinstance(raw, dict):
        raise ConfigError("scenario must be a mapping")
    _reject_unknown(raw, _TOP_KEYS, "scenario")
    praw = raw.get("params") or {}
    _reject_unknown(praw, _PARAM_KEYS, "params")
    try:
        params = make_params(**praw)
    except (ParameterError, TypeError) as exc:
        raise ConfigError(f"bad params: {exc}") from exc

    init = raw.get("initial", "fixed_point")
    if init == "fixed_point":
        initial = fixed_point(params.L_star, params.T_star, params.omega)
    elif isinstance(init, dict):
        _reject_unknown(init, {"x0", "xdot0"}, "initial")
        try:
            initial = StepState(float(init["x0"]), float(init["xdot0"]))
        except KeyError as exc:
            raise ConfigError(f"initial state lacks {exc}") from exc
    else:
        raise ConfigError("initial must be 'fixed_point' or a mapping with x0, xdot0")

    events = []
    for ev in raw.get("events") or ():
        if not isinstance(ev, dict):
            raise ConfigError(f"event must be a mapping, got {ev!r}")
        _reject_unknown(ev, _EVENT_KEYS, "event")
        try:
            events.append(Event(**ev))
        except TypeError as exc:
            raise ConfigError(f"bad event {ev!r}: {exc}") from exc
    return ScenarioConfig(params, initial, tuple(events),
                          n_steps=raw.get("n_steps", 20),
                          sample_dt=raw.get("sample_dt"))


def load_scenario(path, overrides=()) -> ScenarioConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not valid YAML ({exc})") from exc
    return config_from_dict(apply_overrides(raw or {}, overrides))


# ------------------------------------------------- reference scenarios

def gait_switch_scenario(mu: float, h: float = 1.0, n_steps: int = 40) -> ScenarioConfig:
    """Forward gait L*=T*=0.4 reversed to L*=-0.4 at the start of step 4."""
    p = make_params(h=h, mu=mu, L_star=0.4, T_star=0.4)
    return ScenarioConfig(p, fixed_point(0.4, 0.4, p.omega),
                          (Event(4, "switch_gait", L_star=-0.4, T_star=0.4),),
                          n_steps=n_steps)


def push_scenario(impulse: float, mu: float = 0.3, n_steps: int = 40) -> ScenarioConfig:
    """Nominal forward gait pushed forward at the beginning of step 4."""
    p = make_params(mu=mu, L_star=0.4, T_star=0.4)
    return ScenarioConfig(p, fixed_point(0.4, 0.4, p.omega),
                          (Event(4, "push", impulse=impulse),), n_steps=n_steps)
