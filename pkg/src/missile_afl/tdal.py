"""Time-delay adaptive law.

The uncertainty at time t is taken to equal its value a short time earlier,
and that earlier value is recovered from the model residual
``y'' - f3 - g3*u``.  Each of the three histories runs through an identical
single-lag filter, which stands in for the delay and also low-passes the
differentiated measurement.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

from .signal_chain import LagFilter


class AdaptiveConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    enabled: bool = True
    tau_d: float = Field(0.02, gt=0)
    clamp: float | None = Field(None, gt=0)
    # Fin signal in the g3*u history: the deflection actually applied to the
    # airframe, or the controller's command.  The command lets actuator
    # saturation leak into the estimate and wind it up.
    control_signal: Literal["applied", "command"] = "applied"


class BackwardDifference:
    """Backward difference of a sampled signal; the first call returns 0."""

    def __init__(self):
        self.prev: float | None = None

    def step(self, value: float, dt: float) -> float:
        prev, self.prev = self.prev, value
        if prev is None:
            return 0.0
        return (value - prev) / dt


class TimeDelayEstimator:
    """Holds the three lag filters and the current estimate.

    When disabled the estimate stays identically zero (plain feedback
    linearisation).
    """

    def __init__(self, cfg: AdaptiveConfig | None = None):
        self.cfg = cfg or AdaptiveConfig()
        tau = self.cfg.tau_d
        self.yddot_lag = LagFilter(tau)
        self.f3_lag = LagFilter(tau)
        self.g3u_lag = LagFilter(tau)
        self.estimate = 0.0
        self.clamped = False

    @property
    def enabled(self) -> bool:
        return self.cfg.enabled

    def step(self, yddot: float, f3: float, g3u: float, dt: float) -> float:
        """Feed one sample of each history and return the new estimate."""
        if not self.cfg.enabled:
            return 0.0
        est = self.yddot_lag.step(yddot, dt) - self.f3_lag.step(f3, dt) - self.g3u_lag.step(g3u, dt)
        clamp = self.cfg.clamp
        self.clamped = clamp is not None and abs(est) > clamp
        if self.clamped:
            est = clamp if est > 0 else -clamp
        self.estimate = est
        return est

