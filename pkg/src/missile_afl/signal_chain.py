"""Fin actuator, command-shaping filter and the single-lag delay filter."""

from __future__ import annotations

import math
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.linalg import expm

from .errors import ConfigError


class ActuatorConfig(BaseModel):
    """Second-order fin servo with position and rate limits.

    ``ideal=True`` passes the command straight through with no dynamics
    and no limits.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    omega: float = Field(180.0, gt=0)
    zeta: float = Field(0.7, gt=0)
    position_limit: float = Field(math.radians(30.0), gt=0)
    rate_limit: float = Field(math.radians(450.0), gt=0)
    ideal: bool = False


class ActuatorState(NamedTuple):
    delta: float = 0.0
    rate: float = 0.0
    rate_limited: bool = False
    position_limited: bool = False


def _servo(omega: float, zeta: float, delta_cmd: float, d: float, r: float) -> tuple[float, float]:
    return r, omega * omega * (delta_cmd - d) - 2.0 * zeta * omega * r


def actuator_step(cfg: ActuatorConfig, s: ActuatorState, delta_cmd: float, dt: float) -> ActuatorState:
    """Advance the servo one step, then apply the rate limit and the position limit.

    The linear servo ``dd'' = w^2 (cmd - d) - 2 z w d'`` is integrated with
    one RK4 step.  The rate limit bounds both the fin rate and the change in
    deflection over the step, so a finite difference of logged deflections
    never exceeds it.
    """
    if dt <= 0:
        raise ConfigError(f"dt must be positive, got {dt}")
    if cfg.ideal:
        return ActuatorState(delta_cmd, (delta_cmd - s.delta) / dt)

    w, z = cfg.omega, cfg.zeta
    d0, r0 = s.delta, s.rate
    k1 = _servo(w, z, delta_cmd, d0, r0)
    k2 = _servo(w, z, delta_cmd, d0 + 0.5 * dt * k1[0], r0 + 0.5 * dt * k1[1])
    k3 = _servo(w, z, delta_cmd, d0 + 0.5 * dt * k2[0], r0 + 0.5 * dt * k2[1])
    k4 = _servo(w, z, delta_cmd, d0 + dt * k3[0], r0 + dt * k3[1])
    d = d0 + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
    r = r0 + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])

    rmax = cfg.rate_limit
    rate_limited = False
    if abs(r) > rmax:
        r = math.copysign(rmax, r)
        rate_limited = True
    step = d - d0
    if abs(step) > rmax * dt:
        d = d0 + math.copysign(rmax * dt, step)
        rate_limited = True

    lim = cfg.position_limit
    position_limited = False
    if abs(d) > lim:
        d = math.copysign(lim, d)
        if r * d > 0:
            r = 0.0
        position_limited = True
    return ActuatorState(d, r, rate_limited, position_limited)


class CommandFilterConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    omega: float = Field(15.0, gt=0)
    zeta: float = Field(1.0, gt=0)


@lru_cache(maxsize=64)
def _zoh(omega: float, zeta: float, dt: float) -> tuple[np.ndarray, np.ndarray]:
    a = np.array([[0.0, 1.0, 0.0], [-omega**2, -2.0 * zeta * omega, omega**2], [0.0, 0.0, 0.0]])
    e = expm(a * dt)
    return e[:2, :2].copy(), e[:2, 2].copy()


class CommandFilter:
    """Second-order linear command shaper emitting value, rate and acceleration.

    ``x'' = w^2 (u - x) - 2 z w x'`` discretised exactly for inputs held
    over each step.  :meth:`step` returns the outputs at the current time and
    then advances the internal state by ``dt``.
    """

    def __init__(self, cfg: CommandFilterConfig | None = None, value: float = 0.0):
        self.cfg = cfg or CommandFilterConfig()
        self.x = np.array([value, 0.0])

    def step(self, u: float, dt: float) -> tuple[float, float, float]:
        if dt <= 0:
            raise ConfigError(f"dt must be positive, got {dt}")
        w, z = self.cfg.omega, self.cfg.zeta
        x, xd = float(self.x[0]), float(self.x[1])
        xdd = w * w * (u - x) - 2.0 * z * w * xd
        phi, gam = _zoh(w, z, dt)
        self.x = phi @ self.x + gam * u
        return x, xd, xdd


class LagFilter:
    """Single-lag ``1/(tau s + 1)`` standing in for a pure time delay.

    Exact zero-order-hold discretisation; the state is seeded with the first
    sample it sees so there is no start-up transient.
    """

    def __init__(self, tau: float):
        if tau <= 0:
            raise ConfigError(f"lag time constant must be positive, got {tau}")
        self.tau = tau
        self.y: float | None = None

    def step(self, f_now: float, dt: float) -> float:
        if dt <= 0:
            raise ConfigError(f"dt must be positive, got {dt}")
        if dt > self.tau:
            raise ConfigError(f"dt={dt} exceeds lag time constant tau_d={self.tau}")
        if self.y is None:
            self.y = f_now
        else:
            self.y += -math.expm1(-dt / self.tau) * (f_now - self.y)
        return self.y

    def reset(self) -> None:
        self.y = None
