"""Scenario configuration, fixed-step closed-loop simulation and step metrics.

One step of the loop, at ``t_k``:

1. raw acceleration command ``a_z,c``
2. outer PI on measured ``a_z`` (cascade mode) giving the raw inner command
3. command-shaping filter giving the inner command and its two derivatives
4. measurement of ``abar_z``, its rate and second derivative
5. time-delay adaptive update from data through step ``k-1``
6. feedback-linearising fin command
7. log, then a plant RK4 step with the fin deflection held, then the actuator step
"""

from __future__ import annotations

import copy
import csv
import math
from importlib import resources
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Literal

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .afl import InnerLoopGains, fl_terms, inner_control, output_rate
from .errors import AutopilotError, ConfigError, NumericFault, RangeFault, SimulationFault
from .outer_loop import OuterLoopConfig, PIController
from .signal_chain import ActuatorConfig, ActuatorState, CommandFilter, CommandFilterConfig, actuator_step
from .tdal import AdaptiveConfig, BackwardDifference, TimeDelayEstimator
from .vehicle import (
    NOMINAL,
    PlantState,
    UncertaintyConfig,
    VehicleConfig,
    accel_output,
    eval_coeffs,
    plant_deriv,
)

TRACE_SCHEMA = "missile-afl-trace/1"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class PlantConfig(_Section):
    model: Literal["original", "approximate"] = "original"
    alpha0: float = 0.0
    q0: float = 0.0


class ControllerConfig(_Section):
    """``rate_source`` selects how the output rate for the error derivative is obtained.

    ``"model"`` uses the analytic rate of the approximate system, which is
    biased whenever the model is; ``"difference"`` differentiates the
    sampled output.
    """

    rate_source: Literal["difference", "model"] = "difference"
    inner: InnerLoopGains = Field(default_factory=InnerLoopGains)
    adaptive: AdaptiveConfig = Field(default_factory=AdaptiveConfig)
    outer: OuterLoopConfig = Field(default_factory=lambda: OuterLoopConfig(enabled=False))


class CommandConfig(_Section):
    """Step of ``amplitude`` at ``step_time``, or a piecewise-constant ``schedule``."""

    amplitude: float = 350.0
    step_time: float = Field(0.0, ge=0)
    schedule: list[tuple[float, float]] | None = None

    def __call__(self, t: float) -> float:
        if self.schedule:
            value = 0.0
            for t_i, v_i in self.schedule:
                if t >= t_i:
                    value = v_i
            return value
        return self.amplitude if t >= self.step_time else 0.0


class SimConfig(_Section):
    dt: float = Field(0.0005, gt=0)
    duration: float = Field(1.5, gt=0)
    seed: int | None = 0
    decimation: int = Field(1, ge=1)
    log_fl_terms: bool = False
    log_truth_delta: bool = True


class ScenarioConfig(_Section):
    name: str = "scenario"
    vehicle: VehicleConfig = Field(default_factory=VehicleConfig)
    uncertainty: UncertaintyConfig = Field(default_factory=UncertaintyConfig)
    plant: PlantConfig = Field(default_factory=PlantConfig)
    actuator: ActuatorConfig = Field(default_factory=ActuatorConfig)
    command_filter: CommandFilterConfig = Field(default_factory=CommandFilterConfig)
    controller: ControllerConfig = Field(default_factory=ControllerConfig)
    command: CommandConfig = Field(default_factory=CommandConfig)
    sim: SimConfig = Field(default_factory=SimConfig)

    @model_validator(mode="after")
    def _check(self):
        dt = self.sim.dt
        if self.sim.duration <= dt:
            raise ValueError("duration must exceed dt")
        if self.controller.adaptive.enabled and dt > self.controller.adaptive.tau_d:
            raise ValueError(f"dt={dt} exceeds tau_d={self.controller.adaptive.tau_d}")
        if not self.actuator.ideal and 1.0 / dt < 20.0 * self.actuator.omega / (2.0 * math.pi):
            raise ValueError("dt too coarse to resolve the actuator: need 1/dt >= 20*omega_a/(2*pi)")
        if self.sim.decimation != 1:
            raise ValueError("controller decimation other than 1 is not supported")
        return self

    def replace(self, **dotted) -> ScenarioConfig:
        """Copy with dotted-path overrides, e.g. ``replace(**{"sim.dt": 1e-3})``."""
        data = self.model_dump()
        for path, value in dotted.items():
            node = data
            *parents, leaf = path.split(".")
            for p in parents:
                node = node[p]
            if leaf not in node:
                raise ConfigError(f"unknown config key {path!r}")
            node[leaf] = value
        return validate_scenario(data)


def validate_scenario(data: dict) -> ScenarioConfig:
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        where = f"{path}.{k}" if path else k
        if k not in out:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(v, dict) and isinstance(out[k], dict) and k != "per_coefficient":
            out[k] = _merge(out[k], v, where)
        else:
            out[k] = v
    return out


def load_scenario(path: str | Path, base: ScenarioConfig | None = None) -> ScenarioConfig:
    """Read a YAML scenario file; keys not given keep the values of ``base``."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"scenario {path} must be a mapping")
    base = base or ScenarioConfig()
    return validate_scenario(_merge(base.model_dump(), raw))


def dump_scenario(cfg: ScenarioConfig) -> str:
    return yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=False)


def integrate_rk4(deriv: Callable[[float, np.ndarray], np.ndarray], t: float, x: np.ndarray, dt: float) -> np.ndarray:
    """One classic fourth-order Runge-Kutta step of ``x' = deriv(t, x)``."""
    if dt <= 0:
        raise ConfigError(f"dt must be positive, got {dt}")
    k1 = np.asarray(deriv(t, x), float)
    k2 = np.asarray(deriv(t + 0.5 * dt, x + 0.5 * dt * k1), float)
    k3 = np.asarray(deriv(t + 0.5 * dt, x + 0.5 * dt * k2), float)
    k4 = np.asarray(deriv(t + dt, x + dt * k3), float)
    for k in (k1, k2, k3, k4):
        if not np.all(np.isfinite(k)):
            raise NumericFault("non-finite RK4 stage derivative")
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _plant_rhs(cfg: ScenarioConfig, unc: UncertaintyConfig, delta: float):
    def rhs(t: float, x: np.ndarray) -> np.ndarray:
        return np.array(plant_deriv(cfg.vehicle, unc, PlantState(x[0], x[1]), delta, t, cfg.plant.model))

    return rhs


@dataclass
class SimTrace:
    """Column-oriented record of a run on a uniform time grid."""

    columns: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)

    def __getitem__(self, key: str) -> np.ndarray:
        return self.columns[key]

    def __contains__(self, key: str) -> bool:
        return key in self.columns

    def __len__(self) -> int:
        return len(self.columns["t"])

    @property
    def t(self) -> np.ndarray:
        return self.columns["t"]

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        names = list(self.columns)
        with path.open("w", newline="") as fh:
            fh.write(f"# {TRACE_SCHEMA}\n")
            w = csv.writer(fh)
            w.writerow(names)
            cols = [self.columns[n] for n in names]
            for i in range(len(self)):
                w.writerow([_fmt(c[i]) for c in cols])
        return path

    @classmethod
    def from_csv(cls, path: str | Path) -> SimTrace:
        path = Path(path)
        with path.open(newline="") as fh:
            header = fh.readline().strip()
            if header != f"# {TRACE_SCHEMA}":
                raise ConfigError(f"{path}: expected schema line '# {TRACE_SCHEMA}', got {header!r}")
            rows = list(csv.reader(fh))
        names, body = rows[0], rows[1:]
        data = np.array(body, dtype=float).reshape(len(body), len(names))
        return cls({n: data[:, i] for i, n in enumerate(names)}, {"source": str(path)})


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    return repr(float(v))


_COLUMNS = (
    "t", "a_zc", "abar_c_raw", "abar_c", "abar_c_dot", "abar_c_ddot",
    "alpha", "q", "delta_cmd", "delta", "delta_rate",
    "abar_z", "abar_z_dot", "abar_z_true", "a_z", "e", "e_dot",
    "delta_hat", "delta_true", "rate_sat", "pos_sat", "adapt_clamped", "pi_clamped",
)  # fmt: skip


def _truth_residual(cfg: ScenarioConfig, unc: UncertaintyConfig, terms, x, delta, delta_rate, u, t) -> float:
    """Truth-side uncertainty ``y'' - f3 - g3 u`` of the approximate output.

    With ``rate_source="difference"`` ``y''`` is the second derivative of
    ``h(alpha(t))`` along the true dynamics (fin rate included); with
    ``"model"`` it is the derivative of the analytic rate ``dh (f1 + q)``.
    """
    veh = cfg.vehicle
    state = PlantState(x[0], x[1])
    alpha_dot, q_dot = plant_deriv(veh, unc, state, delta, t, cfg.plant.model)
    if cfg.controller.rate_source == "model":
        w = terms.f1 + x[1]
        yddot = (terms.d2h * w + terms.dh * terms.df1) * alpha_dot + terms.dh * q_dot
    else:
        c1 = eval_coeffs(veh, unc, x[0], x[1], t, deriv=1)
        c0 = eval_coeffs(veh, unc, x[0], x[1], t)
        if cfg.plant.model == "original":
            dz = c1.CZ0 + c1.CZd * delta + c1.dCZ
            fin = c0.CZd * delta_rate
        else:
            dz, fin = c1.CZ0, 0.0
        alpha_ddot = veh.force_gain * (dz * alpha_dot + fin) + q_dot
        yddot = terms.d2h * alpha_dot**2 + terms.dh * alpha_ddot
    return yddot - terms.f3 - terms.g3 * u


def run_scenario(cfg: ScenarioConfig) -> SimTrace:
    """Simulate the closed loop; faults are re-raised as :class:`SimulationFault`."""
    dt = cfg.sim.dt
    n = int(round(cfg.sim.duration / dt))
    veh = cfg.vehicle
    unc = cfg.uncertainty
    if unc.enabled and unc.randomize:
        unc = unc.randomized(cfg.sim.seed)

    gains = cfg.controller.inner
    outer = cfg.controller.outer
    pi = PIController(outer) if outer.enabled else None
    shaper = CommandFilter(cfg.command_filter)
    est = TimeDelayEstimator(cfg.controller.adaptive)
    y_diff = BackwardDifference()
    ydot_diff = BackwardDifference()
    act = ActuatorState()

    cols = {k: np.zeros(n + 1) for k in _COLUMNS}
    if cfg.sim.log_fl_terms:
        for k in ("f3", "g3"):
            cols[k] = np.zeros(n + 1)
    if not cfg.sim.log_truth_delta:
        del cols["delta_true"]

    x = np.array([cfg.plant.alpha0, cfg.plant.q0])
    prev_f3 = prev_g3u = None
    delta_hat = 0.0
    for k in range(n + 1):
        t = k * dt
        try:
            a_zc = cfg.command(t)
            state = PlantState(float(x[0]), float(x[1]))
            if pi is not None:
                a_z_meas = accel_output(veh, unc, state, act.delta, t)
                raw = pi.step(a_zc, a_z_meas, dt)
            else:
                raw = a_zc
            r, rd, rdd = shaper.step(raw, dt)

            terms = fl_terms(veh, state, gains.eps_g)
            y = terms.h
            yd = output_rate(terms, state.q)
            if cfg.controller.rate_source == "difference" and k > 0:
                yd = y_diff.step(y, dt)
            else:
                y_diff.step(y, dt)
            yddot = ydot_diff.step(yd, dt)
            if est.enabled and prev_f3 is not None:
                delta_hat = est.step(yddot, prev_f3, prev_g3u, dt)

            u = inner_control(gains, terms, (r, rd, rdd), (y, yd), delta_hat)
            if not math.isfinite(u):
                raise NumericFault(f"non-finite fin command {u}")
            if cfg.actuator.ideal:
                act = ActuatorState(u, (u - act.delta) / dt)
            delta_applied = act.delta

            row = cols
            row["t"][k] = t
            row["a_zc"][k] = a_zc
            row["abar_c_raw"][k] = raw
            row["abar_c"][k] = r
            row["abar_c_dot"][k] = rd
            row["abar_c_ddot"][k] = rdd
            row["alpha"][k] = state.alpha
            row["q"][k] = state.q
            row["delta_cmd"][k] = u
            row["delta"][k] = delta_applied
            row["delta_rate"][k] = act.rate
            row["abar_z"][k] = y
            row["abar_z_dot"][k] = yd
            row["abar_z_true"][k] = veh.accel_gain * eval_coeffs(veh, unc, state.alpha, state.q, t).CZ0
            row["a_z"][k] = accel_output(veh, unc, state, delta_applied, t)
            row["e"][k] = r - y
            row["e_dot"][k] = rd - yd
            row["delta_hat"][k] = delta_hat
            row["rate_sat"][k] = act.rate_limited
            row["pos_sat"][k] = act.position_limited
            row["adapt_clamped"][k] = est.clamped
            row["pi_clamped"][k] = pi.clamped if pi is not None else False
            if "delta_true" in row:
                u_ref = delta_applied if cfg.controller.adaptive.control_signal == "applied" else u
                row["delta_true"][k] = _truth_residual(cfg, unc, terms, x, delta_applied, act.rate, u_ref, t)
            if "f3" in row:
                row["f3"][k] = terms.f3
                row["g3"][k] = terms.g3

            u_hist = delta_applied if cfg.controller.adaptive.control_signal == "applied" else u
            prev_f3, prev_g3u = terms.f3, terms.g3 * u_hist
            if k == n:
                break
            x = integrate_rk4(_plant_rhs(cfg, unc, delta_applied), t, x, dt)
            lo, hi = veh.aero.alpha_range
            if not lo <= x[0] <= hi:
                raise RangeFault("CZ0", float(x[0]), veh.aero.alpha_range)
            if not cfg.actuator.ideal:
                act = actuator_step(cfg.actuator, act, u, dt)
        except AutopilotError as exc:
            raise SimulationFault(k, t, exc) from exc

    meta = {
        "name": cfg.name,
        "dt": dt,
        "step_time": cfg.command.step_time,
        "outer_enabled": outer.enabled,
        "adaptive_enabled": cfg.controller.adaptive.enabled,
    }
    return SimTrace(cols, meta)


def replay_plant(trace: SimTrace, cfg: ScenarioConfig, substeps: int = 16) -> np.ndarray:
    """Re-integrate the plant open-loop with the logged fin deflections.

    Each logged interval is split into ``substeps`` RK4 steps with the fin
    held, so the result isolates integration error from feedback effects.
    Returns an ``(n, 2)`` array of ``(alpha, q)`` on the trace grid.
    """
    unc = cfg.uncertainty
    if unc.enabled and unc.randomize:
        unc = unc.randomized(cfg.sim.seed)
    t = trace.t
    out = np.zeros((len(t), 2))
    x = np.array([trace["alpha"][0], trace["q"][0]])
    out[0] = x
    for k in range(len(t) - 1):
        h = (t[k + 1] - t[k]) / substeps
        rhs = _plant_rhs(cfg, unc, float(trace["delta"][k]))
        for j in range(substeps):
            x = integrate_rk4(rhs, t[k] + j * h, x, h)
        out[k + 1] = x
    return out


def run_ideal_inner_loop(cfg: ScenarioConfig) -> SimTrace:
    """Continuous-time inner loop on the approximate plant with exact model knowledge.

    The control law is re-evaluated inside every RK4 stage together with the
    command filter, so the closed loop is the exact ODE the error dynamics
    describe (no sample-and-hold).  No actuator, no adaptation.
    """
    dt = cfg.sim.dt
    n = int(round(cfg.sim.duration / dt))
    veh = cfg.vehicle
    gains = cfg.controller.inner
    w, z = cfg.command_filter.omega, cfg.command_filter.zeta

    def control(t, x):
        alpha, q, r, rd = x
        rdd = w * w * (cfg.command(t) - r) - 2.0 * z * w * rd
        terms = fl_terms(veh, PlantState(alpha, q), gains.eps_g)
        yd = output_rate(terms, q)
        u = inner_control(gains, terms, (r, rd, rdd), (terms.h, yd))
        return terms, yd, rdd, u

    def rhs(t, x):
        _, _, _, u = control(t, x)
        a_dot, q_dot = plant_deriv(veh, NOMINAL, PlantState(x[0], x[1]), u, t, "approximate")
        return np.array([a_dot, q_dot, x[3], w * w * (cfg.command(t) - x[2]) - 2.0 * z * w * x[3]])

    x = np.array([cfg.plant.alpha0, cfg.plant.q0, 0.0, 0.0])
    names = ("t", "alpha", "q", "abar_c", "abar_c_dot", "abar_c_ddot", "abar_z", "abar_z_dot", "e", "e_dot", "delta")
    cols = {k: np.zeros(n + 1) for k in names}
    for k in range(n + 1):
        t = k * dt
        terms, yd, rdd, u = control(t, x)
        vals = (t, x[0], x[1], x[2], x[3], rdd, terms.h, yd, x[2] - terms.h, x[3] - yd, u)
        for name, v in zip(names, vals):
            cols[name][k] = v
        if k < n:
            x = integrate_rk4(rhs, t, x, dt)
    return SimTrace(cols, {"name": cfg.name + "-ideal", "dt": dt, "step_time": cfg.command.step_time})


@dataclass(frozen=True)
class StepMetrics:
    rise_time: float
    settling_time: float
    overshoot: float
    steady_state_error: float
    undershoot: bool
    undershoot_depth: float
    settled: bool

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def _crossing(t: np.ndarray, y: np.ndarray, level: float) -> float:
    idx = np.nonzero(y >= level)[0]
    if idx.size == 0:
        return math.nan
    i = int(idx[0])
    if i == 0:
        return float(t[0])
    y0, y1 = y[i - 1], y[i]
    return float(t[i - 1] + (level - y0) / (y1 - y0) * (t[i] - t[i - 1]))


def compute_metrics(
    trace: SimTrace,
    channel: Literal["abar_z", "a_z"] = "a_z",
    command: float | None = None,
    step_time: float | None = None,
    band: float = 0.02,
    tail: float = 0.1,
    undershoot_window: float = 0.05,
) -> StepMetrics:
    """Standard step-response metrics on the chosen channel.

    The response is normalised by the final command so the same definitions
    apply to positive and negative steps.  ``rise_time`` is 10-90 %,
    ``settling_time`` is the last entry into the ``band`` envelope,
    ``overshoot`` is in percent, ``steady_state_error`` is the mean
    normalised error over the last ``tail`` fraction.  A trace whose tail
    leaves the band is reported with ``settled=False``.
    """
    t = trace.t
    if step_time is None:
        step_time = float(trace.meta.get("step_time", 0.0))
    if command is None:
        ref = trace["a_zc"] if channel == "a_z" else trace["abar_c_raw"]
        command = float(ref[-1])
    if command == 0.0:
        raise ValueError("step metrics need a nonzero final command")
    mask = t >= step_time
    ts = t[mask] - step_time
    y = trace[channel][mask] / command

    rise = _crossing(ts, y, 0.9) - _crossing(ts, y, 0.1)
    if math.isnan(rise):
        rise = math.inf
    outside = np.nonzero(np.abs(y - 1.0) > band)[0]
    if outside.size == 0:
        settling = 0.0
    elif outside[-1] == len(y) - 1:
        settling = math.inf
    else:
        i = int(outside[-1])
        edge = 1.0 + band if y[i] > 1.0 else 1.0 - band
        settling = float(ts[i] + (edge - y[i]) / (y[i + 1] - y[i]) * (ts[i + 1] - ts[i]))
    overshoot = max(0.0, float(np.max(y)) - 1.0) * 100.0
    n_tail = max(1, int(round(tail * len(y))))
    sse = float(abs(np.mean(y[-n_tail:]) - 1.0))
    early = y[ts <= undershoot_window]
    depth = max(0.0, -float(np.min(early))) if early.size else 0.0
    settled = bool(np.all(np.abs(y[-n_tail:] - 1.0) <= band))
    return StepMetrics(rise, settling, overshoot, sse, depth > 1e-6, depth, settled)


def builtin_scenarios() -> list[str]:
    """Names of the scenario files shipped with the package."""
    root = resources.files("missile_afl") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def resolve_scenario(spec: str | Path) -> ScenarioConfig:
    """Load a scenario from a file path, or by the name of a shipped scenario."""
    path = Path(spec)
    if path.is_file():
        return load_scenario(path)
    if str(spec) in builtin_scenarios():
        with resources.as_file(resources.files("missile_afl") / "scenarios" / f"{spec}.yaml") as p:
            return load_scenario(p)
    raise ConfigError(f"no scenario file or built-in scenario named {spec!r}")
