"""Pitch-plane airframe: aerodynamic coefficients and nonlinear plant dynamics.

The aerodynamic model is a set of polynomials in angle of attack whose
coefficients may vary linearly with Mach number.  The shipped default is the
classic tail-controlled benchmark airframe (cubic + alpha|alpha| + linear
normal-force and pitching-moment curves) flown at Mach 2.5 near sea level.

Units are SI and radians throughout.
"""

from __future__ import annotations

import math
from typing import Literal, NamedTuple

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator, model_validator

from .errors import ConfigError, NumericFault, RangeFault

COEFFICIENTS = ("CZ0", "CZd", "CM0", "CMq", "CMd")

Basis = Literal["1", "a", "a|a|", "a^2", "a^3"]


def _basis(name: str, a: float, deriv: int) -> float:
    if name == "1":
        return 1.0 if deriv == 0 else 0.0
    if name == "a":
        return (a, 1.0, 0.0)[deriv]
    if name == "a|a|":
        if deriv == 0:
            return a * abs(a)
        if deriv == 1:
            return 2.0 * abs(a)
        return 2.0 * math.copysign(1.0, a) if a != 0.0 else 0.0
    if name == "a^2":
        return (a * a, 2.0 * a, 2.0)[deriv]
    if name == "a^3":
        return (a * a * a, 3.0 * a * a, 6.0 * a)[deriv]
    raise ValueError(f"unknown basis {name!r}")


class _Frozen(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class AeroTerm(_Frozen):
    """One term ``(c0 + c1*M) * basis(alpha)``."""

    basis: Basis
    c0: float
    c1: float = 0.0


class AeroPolynomial(_Frozen):
    terms: list[AeroTerm]

    _packed: tuple = PrivateAttr()

    def model_post_init(self, __context) -> None:
        self._packed = tuple((t.basis, t.c0, t.c1) for t in self.terms)

    def __call__(self, mach: float, alpha: float, deriv: int = 0) -> float:
        """Evaluate the polynomial (or its ``deriv``-th alpha derivative)."""
        total = 0.0
        for basis, c0, c1 in self._packed:
            total += (c0 + c1 * mach) * _basis(basis, alpha, deriv)
        return total


def _poly(*terms: tuple) -> AeroPolynomial:
    return AeroPolynomial(terms=[AeroTerm(basis=b, c0=c0, c1=c1) for b, c0, c1 in terms])


class AeroModel(_Frozen):
    """Per-coefficient evaluators and the alpha range they are valid on.

    ``CMq`` is evaluated at ``alpha`` like the others; only its Mach
    dependence is used by the default model.
    """

    CZ0: AeroPolynomial
    CZd: AeroPolynomial
    CM0: AeroPolynomial
    CMq: AeroPolynomial
    CMd: AeroPolynomial
    alpha_range: tuple[float, float] = (-0.35, 0.35)

    @field_validator("alpha_range")
    @classmethod
    def _ordered(cls, v):
        if not v[0] < v[1]:
            raise ValueError("alpha_range must be (low, high) with low < high")
        return v


def benchmark_aero() -> AeroModel:
    """Tail-controlled benchmark aerodynamics (alpha and delta in rad)."""
    a_n, b_n, c_n, d_n = 19.373, -31.023, -9.717, -1.948
    a_m, b_m, c_m, d_m = 40.440, -64.015, 2.922, -11.803
    return AeroModel(
        # c_n * (2 - M/3) and c_m * (-7 + 8M/3) give the Mach-linear slopes.
        CZ0=_poly(("a^3", a_n, 0.0), ("a|a|", b_n, 0.0), ("a", 2.0 * c_n, -c_n / 3.0)),
        CZd=_poly(("1", d_n, 0.0)),
        CM0=_poly(("a^3", a_m, 0.0), ("a|a|", b_m, 0.0), ("a", -7.0 * c_m, 8.0 * c_m / 3.0)),
        CMq=_poly(("1", -1000.0, 0.0)),
        CMd=_poly(("1", d_m, 0.0)),
        alpha_range=(-0.35, 0.35),
    )


class VehicleConfig(_Frozen):
    """Mass properties, reference geometry, flight condition and aerodynamics."""

    m: float = Field(204.02, gt=0)
    S: float = Field(0.0409, gt=0)
    l: float = Field(0.2286, gt=0)
    I_yy: float = Field(247.44, gt=0)
    V: float = Field(850.75, gt=0)
    Q: float = Field(443_313.0, gt=0)
    M: float = Field(2.5, gt=0)
    aero: AeroModel = Field(default_factory=benchmark_aero)

    @property
    def force_gain(self) -> float:
        """QS/(mV): scales C_Z into alpha-dot."""
        return self.Q * self.S / (self.m * self.V)

    @property
    def accel_gain(self) -> float:
        """QS/m: scales C_Z into normal acceleration."""
        return self.Q * self.S / self.m

    @property
    def moment_gain(self) -> float:
        """QSl/I_yy: scales C_M into pitch acceleration."""
        return self.Q * self.S * self.l / self.I_yy


class CrossCoupling(_Frozen):
    """Smooth bounded additive coefficient ``bias + amplitude*tanh(alpha/alpha_ref)``."""

    bias: float = 0.0
    amplitude: float = 0.0
    alpha_ref: float = Field(0.1, gt=0)

    def __call__(self, alpha: float, deriv: int = 0) -> float:
        x = alpha / self.alpha_ref
        th = math.tanh(x)
        if deriv == 0:
            return self.bias + self.amplitude * th
        sech2 = 1.0 - th * th
        if deriv == 1:
            return self.amplitude * sech2 / self.alpha_ref
        return -2.0 * self.amplitude * th * sech2 / self.alpha_ref**2


class MomentDisturbance(_Frozen):
    """Time-varying additive pitching-moment coefficient used to inject test uncertainty.

    ``bias + rate*t + amplitude*sin(frequency*t)``
    """

    bias: float = 0.0
    rate: float = 0.0
    amplitude: float = 0.0
    frequency: float = 0.0

    def __call__(self, t: float) -> float:
        return self.bias + self.rate * t + self.amplitude * math.sin(self.frequency * t)


class UncertaintyConfig(_Frozen):
    """Truth-side deviation from the nominal (controller) aerodynamics.

    ``delta_pert`` scales every coefficient family by ``1 + delta_pert``;
    ``per_coefficient`` overrides the shared value for named families.
    """

    enabled: bool = False
    delta_pert: float = 0.0
    per_coefficient: dict[str, float] = Field(default_factory=dict)
    randomize: bool = False
    dCZ: CrossCoupling = Field(default_factory=CrossCoupling)
    dCM: CrossCoupling = Field(default_factory=CrossCoupling)
    disturbance: MomentDisturbance = Field(default_factory=MomentDisturbance)

    @field_validator("delta_pert")
    @classmethod
    def _cap(cls, v):
        if abs(v) > 0.5:
            raise ValueError(f"|delta_pert| = {abs(v)} exceeds the 0.5 sanity cap")
        return v

    @field_validator("per_coefficient")
    @classmethod
    def _known(cls, v):
        for name, x in v.items():
            if name not in COEFFICIENTS:
                raise ValueError(f"unknown coefficient family {name!r}; expected one of {COEFFICIENTS}")
            if abs(x) > 0.5:
                raise ValueError(f"|per_coefficient[{name}]| = {abs(x)} exceeds the 0.5 sanity cap")
        return v

    def scale(self, name: str) -> float:
        if not self.enabled:
            return 1.0
        return 1.0 + self.per_coefficient.get(name, self.delta_pert)

    def randomized(self, seed: int | None) -> UncertaintyConfig:
        """Draw per-family perturbations uniformly in ``[-|delta_pert|, |delta_pert|]``."""
        import numpy as np

        rng = np.random.default_rng(seed)
        bound = abs(self.delta_pert)
        draws = {name: float(rng.uniform(-bound, bound)) for name in COEFFICIENTS}
        draws.update(self.per_coefficient)
        return self.model_copy(update={"per_coefficient": draws, "randomize": False})


NOMINAL = UncertaintyConfig()


class PlantState(NamedTuple):
    alpha: float
    q: float


class CoeffSet(NamedTuple):
    CZ0: float
    CZd: float
    CM0: float
    CMq: float
    CMd: float
    dCZ: float
    dCM: float


def _check_finite(**values: float) -> None:
    for name, v in values.items():
        if not math.isfinite(v):
            raise NumericFault(f"non-finite {name}: {v}")


def eval_coeffs(
    cfg: VehicleConfig,
    unc: UncertaintyConfig,
    alpha: float,
    q: float = 0.0,
    t: float = 0.0,
    deriv: int = 0,
) -> CoeffSet:
    """Coefficients (or their alpha derivatives) as seen by the truth-side plant.

    With ``unc.enabled`` every family is scaled by ``1 + delta_pert`` and the
    cross-coupling terms are added; otherwise the nominal values are returned
    with zero additive terms.  The time disturbance enters ``dCM`` only for
    ``deriv == 0``.
    """
    aero = cfg.aero
    lo, hi = aero.alpha_range
    if not lo <= alpha <= hi:
        raise RangeFault("CZ0", alpha, aero.alpha_range)
    M = cfg.M
    s = unc.scale
    if unc.enabled:
        dcz = unc.dCZ(alpha, deriv)
        dcm = unc.dCM(alpha, deriv)
        if deriv == 0:
            dcm += unc.disturbance(t)
    else:
        dcz = dcm = 0.0
    return CoeffSet(
        s("CZ0") * aero.CZ0(M, alpha, deriv),
        s("CZd") * aero.CZd(M, alpha, deriv),
        s("CM0") * aero.CM0(M, alpha, deriv),
        s("CMq") * aero.CMq(M, alpha, deriv),
        s("CMd") * aero.CMd(M, alpha, deriv),
        dcz,
        dcm,
    )


def plant_deriv(
    cfg: VehicleConfig,
    unc: UncertaintyConfig,
    s: PlantState,
    delta: float,
    t: float = 0.0,
    model: str = "original",
) -> tuple[float, float]:
    """Return ``(alpha_dot, q_dot)`` of the pitch-plane equations of motion.

    ``model="approximate"`` drops the fin force term and the force
    cross-coupling from alpha-dot, leaving the minimum-phase system the
    inner loop is designed on.
    """
    alpha, q = s
    _check_finite(alpha=alpha, q=q, delta=delta)
    c = eval_coeffs(cfg, unc, alpha, q, t)
    if model == "original":
        z = c.CZ0 + c.CZd * delta + c.dCZ
    elif model == "approximate":
        z = c.CZ0
    else:
        raise ConfigError(f"unknown plant model {model!r}")
    alpha_dot = cfg.force_gain * z + q
    q_dot = cfg.moment_gain * (c.CM0 + c.CMq * q * cfg.l / (2.0 * cfg.V) + c.CMd * delta + c.dCM)
    return alpha_dot, q_dot


def accel_output(
    cfg: VehicleConfig,
    unc: UncertaintyConfig,
    s: PlantState,
    delta: float,
    t: float = 0.0,
) -> float:
    """Normal acceleration a_z = (QS/m)(C_Z0 + C_Zd*delta + dC_Z)."""
    alpha, q = s
    _check_finite(alpha=alpha, q=q, delta=delta)
    c = eval_coeffs(cfg, unc, alpha, q, t)
    return cfg.accel_gain * (c.CZ0 + c.CZd * delta + c.dCZ)
