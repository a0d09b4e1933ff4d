"""Trim, small-signal linearisation and transmission zeros.

Used to show that total normal acceleration is a nonminimum-phase output of
the airframe while the acceleration-by-alpha output has no finite zeros.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
import scipy.linalg
from scipy.optimize import brentq

from .errors import AnalysisFault, RangeFault
from .vehicle import NOMINAL, PlantState, UncertaintyConfig, VehicleConfig, eval_coeffs, plant_deriv

Output = Literal["original", "approximate"]


@dataclass(frozen=True)
class Trim:
    alpha: float
    q: float
    delta: float


@dataclass(frozen=True)
class LinearModel:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    trim: Trim
    output: str

    def transfer_numerator(self) -> np.ndarray:
        """Coefficients of ``C adj(sI - A) B + D det(sI - A)``, highest power first."""
        (a11, a12), (a21, a22) = self.A
        b1, b2 = self.B[:, 0]
        c1, c2 = self.C[0]
        d = self.D[0, 0]
        return np.array(
            [
                d,
                c1 * b1 + c2 * b2 - d * (a11 + a22),
                c1 * (a12 * b2 - a22 * b1) + c2 * (a21 * b1 - a11 * b2) + d * (a11 * a22 - a12 * a21),
            ]
        )


def trim(
    cfg: VehicleConfig,
    alpha0: float,
    unc: UncertaintyConfig = NOMINAL,
    fin_limit: float = np.radians(30.0),
) -> Trim:
    """Moment-balance trim at ``alpha0``.

    ``q`` is chosen so alpha-dot vanishes for a given fin angle, and the fin
    angle is then found by bracketing root search on pitch acceleration.
    """
    lo, hi = cfg.aero.alpha_range
    if not lo <= alpha0 <= hi:
        raise RangeFault("CZ0", alpha0, cfg.aero.alpha_range)

    def q_of(delta: float) -> float:
        alpha_dot_no_q, _ = plant_deriv(cfg, unc, PlantState(alpha0, 0.0), delta)
        return -alpha_dot_no_q

    def q_dot(delta: float) -> float:
        return plant_deriv(cfg, unc, PlantState(alpha0, q_of(delta)), delta)[1]

    try:
        delta0 = brentq(q_dot, -fin_limit, fin_limit, xtol=1e-14, rtol=1e-14)
    except ValueError as exc:
        raise AnalysisFault(f"no trim fin angle within +/-{fin_limit:.4g} rad at alpha={alpha0:.6g}") from exc
    return Trim(alpha0, q_of(delta0), delta0)


def linearize(
    cfg: VehicleConfig,
    output: Output,
    tr: Trim,
    unc: UncertaintyConfig = NOMINAL,
) -> LinearModel:
    """Analytic Jacobians about ``tr`` for the original or approximate output."""
    alpha, q, delta = tr.alpha, tr.q, tr.delta
    c1 = eval_coeffs(cfg, unc, alpha, q, deriv=1)
    c0 = eval_coeffs(cfg, unc, alpha, q)
    kf, ka, km = cfg.force_gain, cfg.accel_gain, cfg.moment_gain

    m_alpha = km * (c1.CM0 + c1.CMq * q * cfg.l / (2 * cfg.V) + c1.CMd * delta + c1.dCM)
    m_q = km * c0.CMq * cfg.l / (2 * cfg.V)
    m_delta = km * c0.CMd
    if output == "original":
        dz = c1.CZ0 + c1.CZd * delta + c1.dCZ
        A = np.array([[kf * dz, 1.0], [m_alpha, m_q]])
        B = np.array([[kf * c0.CZd], [m_delta]])
        C = np.array([[ka * dz, 0.0]])
        D = np.array([[ka * c0.CZd]])
    elif output == "approximate":
        A = np.array([[kf * c1.CZ0, 1.0], [m_alpha, m_q]])
        B = np.array([[0.0], [m_delta]])
        C = np.array([[ka * c1.CZ0, 0.0]])
        D = np.array([[0.0]])
    else:
        raise ValueError(f"unknown output {output!r}")
    for name, mat in (("A", A), ("B", B), ("C", C), ("D", D)):
        if not np.all(np.isfinite(mat)):
            raise AnalysisFault(f"non-finite entries in {name}")
    return LinearModel(A, B, C, D, tr, output)


def transmission_zeros(model: LinearModel) -> np.ndarray:
    """Finite generalized eigenvalues of the Rosenbrock system pencil."""
    n = model.A.shape[0]
    big = np.block([[model.A, model.B], [model.C, model.D]])
    e = np.zeros_like(big)
    e[:n, :n] = np.eye(n)
    # Pencil singular for every s means the transfer function is identically zero.
    rng = np.random.default_rng(0)
    s_probe = complex(rng.normal(), rng.normal())
    if abs(np.linalg.det(s_probe * e - big)) < 1e-14 * max(1.0, np.abs(big).max()) ** (n + 1):
        raise AnalysisFault("degenerate system pencil (transfer function identically zero)")
    w = scipy.linalg.eig(big, e, right=False, homogeneous_eigvals=True)
    alpha, beta = w
    finite = np.abs(beta) > 1e-12 * np.maximum(1.0, np.abs(alpha))
    return np.sort_complex(alpha[finite] / beta[finite])
