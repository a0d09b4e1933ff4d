"""Approximate feedback linearisation of the acceleration-by-alpha output.

The controller designs on the approximate system (fin force dropped from
alpha-dot) whose output ``abar_z = (QS/m) C_Z0(M, alpha)`` has relative
degree two.  Derivatives of the aerodynamic polynomials are analytic.

All functions here take the controller-side (nominal) vehicle config.
"""

from __future__ import annotations

from typing import NamedTuple

from pydantic import BaseModel, ConfigDict, Field

from .errors import AuthorityFault
from .vehicle import NOMINAL, PlantState, VehicleConfig, eval_coeffs


class InnerLoopGains(BaseModel):
    """Gains of the error dynamics ``e'' + k1 e' + k2 e = 0``."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    k1: float = Field(30.0, gt=0)
    k2: float = Field(225.0, gt=0)
    eps_g: float = Field(1e-6, gt=0)


class FLTerms(NamedTuple):
    f1: float
    f2: float
    g2: float
    h: float
    dh: float
    d2h: float
    df1: float
    f3: float
    g3: float


def approx_output(cfg: VehicleConfig, s: PlantState) -> float:
    """Acceleration caused by angle of attack alone, ``(QS/m) C_Z0``."""
    c = eval_coeffs(cfg, NOMINAL, s.alpha)
    return cfg.accel_gain * c.CZ0


def fl_terms(cfg: VehicleConfig, s: PlantState, eps_g: float = 1e-6) -> FLTerms:
    """Lie-derivative chain of the approximate system at state ``s``.

    Raises :class:`AuthorityFault` when ``|g3| < eps_g``.
    """
    alpha, q = s
    c0 = eval_coeffs(cfg, NOMINAL, alpha)
    c1 = eval_coeffs(cfg, NOMINAL, alpha, deriv=1)
    c2 = eval_coeffs(cfg, NOMINAL, alpha, deriv=2)

    kf, ka, km = cfg.force_gain, cfg.accel_gain, cfg.moment_gain
    f1 = kf * c0.CZ0
    df1 = kf * c1.CZ0
    f2 = km * (c0.CM0 + c0.CMq * q * cfg.l / (2.0 * cfg.V))
    g2 = km * c0.CMd
    h = ka * c0.CZ0
    dh = ka * c1.CZ0
    d2h = ka * c2.CZ0

    w = f1 + q
    f3 = d2h * w * w + dh * (df1 * w + f2)
    g3 = dh * g2
    if not abs(g3) >= eps_g:
        raise AuthorityFault(f"|g3|={abs(g3):.3e} below floor {eps_g:.3e} at alpha={alpha:.6g}")
    return FLTerms(f1, f2, g2, h, dh, d2h, df1, f3, g3)


def output_rate(terms: FLTerms, q: float) -> float:
    """First derivative of the approximate output along the approximate system."""
    return terms.dh * (terms.f1 + q)


def inner_control(
    gains: InnerLoopGains,
    terms: FLTerms,
    cmd: tuple[float, float, float],
    meas: tuple[float, float],
    delta_hat: float = 0.0,
) -> float:
    """Fin command that imposes the error dynamics on the approximate output.

    ``cmd`` is ``(abar_c, abar_c_dot, abar_c_ddot)``; ``meas`` is
    ``(abar_z, abar_z_dot)``; ``delta_hat`` is the uncertainty estimate.
    """
    if not abs(terms.g3) >= gains.eps_g:
        raise AuthorityFault(f"|g3|={abs(terms.g3):.3e} below floor {gains.eps_g:.3e}")
    r, rd, rdd = cmd
    y, yd = meas
    e = r - y
    ed = rd - yd
    return (-terms.f3 + rdd + gains.k1 * ed + gains.k2 * e - delta_hat) / terms.g3
