"""PI outer loop on total acceleration, its gain synthesis and inner-loop identification."""

from __future__ import annotations

import math
from typing import Literal, NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import IdentificationFault, SynthesisFault


def synthesize_gains(omega_r: float, zeta_r: float, K: float, tau: float) -> tuple[float, float]:
    """PI gains placing the cascade closed-loop poles at the reference model's.

    The inner loop is modelled as ``K / (tau s + 1)``.  Requires
    ``2 zeta_r omega_r tau >= 1`` so that ``kp`` is non-negative.
    """
    for name, v in (("omega_r", omega_r), ("zeta_r", zeta_r), ("K", K), ("tau", tau)):
        if not v > 0:
            raise SynthesisFault(f"{name} must be positive, got {v}")
    lead = 2.0 * zeta_r * omega_r * tau
    if lead < 1.0:
        raise SynthesisFault(f"2*zeta_r*omega_r*tau = {lead:.6g} < 1 gives a negative proportional gain")
    return (lead - 1.0) / K, tau * omega_r**2 / K


def closed_loop_denominator(kp: float, ki: float, K: float, tau: float) -> tuple[float, float, float]:
    """Monic characteristic polynomial ``(1, (K kp + 1)/tau, K ki/tau)``."""
    return 1.0, (K * kp + 1.0) / tau, K * ki / tau


class OuterLoopConfig(BaseModel):
    """Outer-loop settings.

    ``mode="explicit"`` uses ``kp``/``ki`` as given; ``mode="synthesized"``
    derives them from the reference model and the identified inner loop.
    ``integrator_limit=None`` disables anti-windup clamping.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    enabled: bool = True
    mode: Literal["explicit", "synthesized"] = "explicit"
    kp: float = 0.61
    ki: float = 13.2
    omega_r: float | None = None
    zeta_r: float | None = None
    K: float | None = None
    tau: float | None = None
    integrator_limit: float | None = Field(100.0, gt=0)

    @model_validator(mode="after")
    def _check_mode(self):
        if self.mode == "synthesized":
            missing = [n for n in ("omega_r", "zeta_r", "K", "tau") if getattr(self, n) is None]
            if missing:
                raise ValueError(f"synthesized mode needs {', '.join(missing)}")
            synthesize_gains(self.omega_r, self.zeta_r, self.K, self.tau)
        return self

    def gains(self) -> tuple[float, float]:
        if self.mode == "synthesized":
            return synthesize_gains(self.omega_r, self.zeta_r, self.K, self.tau)
        return self.kp, self.ki


class PIController:
    """Discrete PI with trapezoidal integration and accumulator clamping."""

    def __init__(self, cfg: OuterLoopConfig | None = None):
        self.cfg = cfg or OuterLoopConfig()
        self.kp, self.ki = self.cfg.gains()
        self.accumulator = 0.0
        self.prev_error: float | None = None
        self.clamped = False

    def step(self, command: float, measured: float, dt: float) -> float:
        """Return the raw inner-loop command for this sample."""
        err = command - measured
        if self.prev_error is not None:
            self.accumulator += 0.5 * (self.prev_error + err) * dt
        self.prev_error = err
        lim = self.cfg.integrator_limit
        self.clamped = lim is not None and abs(self.accumulator) > lim
        if self.clamped:
            self.accumulator = math.copysign(lim, self.accumulator)
        return self.kp * err + self.ki * self.accumulator


class InnerModel(NamedTuple):
    tau: float
    K: float


def identify_inner_model(
    t: np.ndarray,
    abar: np.ndarray,
    a_z: np.ndarray,
    step_time: float = 0.0,
    tail: float = 0.2,
    settle_tol: float = 0.02,
) -> InnerModel:
    """Fit ``K/(tau s + 1)`` to an inner-loop-only step response.

    ``tau`` is the time after ``step_time`` at which ``abar`` first reaches
    ``1 - 1/e`` of its final value (linear interpolation between samples);
    ``K`` is the mean ratio ``a_z/abar`` over the last ``tail`` fraction of
    the record.  Raises :class:`IdentificationFault` when the tail varies by
    more than ``settle_tol`` of the final value.
    """
    t = np.asarray(t, float)
    abar = np.asarray(abar, float)
    a_z = np.asarray(a_z, float)
    n_tail = max(2, int(round(tail * len(t))))
    tail_abar = abar[-n_tail:]
    final = float(np.mean(tail_abar))
    if np.ptp(tail_abar) > settle_tol * abs(final):
        raise IdentificationFault("approximate acceleration did not settle over the tail window")

    pre = abar[t <= step_time]
    start = float(pre[-1]) if pre.size else 0.0
    if final == start:
        raise IdentificationFault("no step in the approximate acceleration")
    frac = (abar - start) / (final - start) / (1.0 - math.exp(-1.0))
    idx = np.nonzero((t >= step_time) & (frac >= 1.0))[0]
    if idx.size == 0:
        raise IdentificationFault("response never reached 63.2% of its final value")
    i = int(idx[0])
    if i == 0 or t[i - 1] < step_time:
        t_hit = t[i]
    else:
        f0, f1 = frac[i - 1], frac[i]
        t_hit = t[i - 1] + (1.0 - f0) / (f1 - f0) * (t[i] - t[i - 1])
    K = float(np.mean(a_z[-n_tail:] / tail_abar))
    return InnerModel(float(t_hit - step_time), K)
