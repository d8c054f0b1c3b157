"""Effective temperature of the cooled mode, three ways.

* area: <dq^2> from the integrated spectrum, T = hbar Omega_m <dq^2> / k_B
* damping: T gamma_m / gamma_eff
* peak: invert the resonant peak height S_q(Omega_eff) for T_eff

They coincide when the back-action noise is negligible next to the thermal
force and the line stays Lorentzian, which is the regime of interest.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .params import HBAR, KB, BathParams, MechanicalParams, SystemParams
from .response import chi_eff, effective_dynamics, full_stability, gamma_eff
from .spectra import s_absorption, s_radiation_pressure, s_thermal
from .steady import OperatingPoint, operating_point


class ThermometryError(RuntimeError):
    pass


class IntegrationNotConverged(ThermometryError):
    pass


class UnstableOperatingPoint(ThermometryError):
    pass


class AntiDamped(ThermometryError):
    pass


class NonPositivePeak(ThermometryError):
    pass


class EquipartitionWarning(UserWarning):
    pass


@dataclass(frozen=True)
class TemperatureReport:
    t_area: float
    t_gamma: float
    t_peak: float
    n_eff: float
    q_var: float
    p_var: float
    equipartition_ratio: float
    inputs: dict = field(default_factory=dict)

    def spread(self) -> float:
        """Largest pairwise relative difference among the three estimators."""
        t = [self.t_area, self.t_gamma, self.t_peak]
        return max(abs(a - b) / min(a, b) for i, a in enumerate(t) for b in t[i + 1:])


def _integrand(op, mech, bath, flat):
    def sq(w):
        th = s_thermal(w, mech, bath, flat=flat)
        tot = th + s_radiation_pressure(w, op) + s_absorption(w, op)
        return float(np.abs(chi_eff(w, op, mech)) ** 2 * tot)
    return sq


def _breakpoints(op, mech):
    r = effective_dynamics(mech.omega_m, op, mech).scalar()
    c = r.omega_eff if np.isfinite(r.omega_eff) else mech.omega_m
    w = max(abs(r.gamma_eff), mech.gamma_m)
    steps = np.array([0.0, 0.25, 0.5, 1, 2, 4, 8, 16, 40, 100, 300, 1000, 3000, 1e4])
    pts = np.concatenate([c - w * steps, c + w * steps])
    for d in (abs(op.delta), abs(op.delta) - op.kappa_T, abs(op.delta) + op.kappa_T, mech.omega_m):
        pts = np.append(pts, d)
    upper = 10.0 * max(mech.omega_m, abs(op.delta) + op.kappa_T)
    pts = pts[(pts > 0) & (pts < upper)]
    return np.unique(np.concatenate([[0.0], pts, [upper]]))


def variances(op: OperatingPoint, mech: MechanicalParams, bath: BathParams,
              flat_thermal: bool = False, rtol: float = 1e-3) -> tuple[float, float, float]:
    """(<dq^2>, <dp^2>, relative error estimate) by piecewise adaptive quadrature.

    The spectrum is even in w, so twice the positive half-line is integrated.
    With the coth thermal form the momentum integrand falls only as 1/w, so
    both integrals stop at the thermal frequency k_B T / hbar; the flat form
    converges and is integrated to infinity.
    """
    if not full_stability(op, mech):
        raise UnstableOperatingPoint("operating point is dynamically unstable")
    sq = _integrand(op, mech, bath, flat_thermal)
    om2 = mech.omega_m ** 2
    pts = _breakpoints(op, mech)
    cut = KB * bath.temperature / HBAR
    q_tot = p_tot = q_err = p_err = 0.0
    for a, b in zip(pts[:-1], pts[1:]):
        v, e = quad(sq, a, b, limit=200, epsabs=0.0, epsrel=1e-10)
        q_tot += v
        q_err += e
        v, e = quad(lambda w: w * w / om2 * sq(w), a, b, limit=200, epsabs=0.0, epsrel=1e-10)
        p_tot += v
        p_err += e
    top = pts[-1]
    edges = np.geomspace(top, cut, max(int(np.log10(cut / top)) + 2, 2))
    tail = list(zip(edges[:-1], edges[1:]))
    if flat_thermal:
        tail.append((cut, np.inf))
    for a, b in tail:
        v, e = quad(sq, a, b, limit=200, epsabs=1e-12 * q_tot, epsrel=1e-8)
        q_tot += v
        q_err += e
        v, e = quad(lambda w: w * w / om2 * sq(w), a, b, limit=200, epsabs=1e-12 * p_tot,
                    epsrel=1e-8)
        p_tot += v
        p_err += e
    q_var, p_var = q_tot / math.pi, p_tot / math.pi
    err = max(q_err / q_tot, p_err / p_tot)
    if not np.isfinite(err) or err > rtol:
        raise IntegrationNotConverged(f"relative error estimate {err:.2e} exceeds {rtol:.1e}")
    return q_var, p_var, err


def t_area(q_var: float, mech: MechanicalParams, p_var: float | None = None) -> float:
    if p_var is not None and not 0.9 <= q_var / p_var <= 1.1:
        warnings.warn(f"equipartition ratio {q_var / p_var:.3f} outside [0.9, 1.1]",
                      EquipartitionWarning, stacklevel=2)
    return HBAR * mech.omega_m * q_var / KB


def t_gamma(op: OperatingPoint, mech: MechanicalParams, bath: BathParams) -> float:
    ge = gamma_eff(op, mech)
    if ge <= 0:
        raise AntiDamped(f"gamma_eff = {ge:.4g} rad/s is not positive")
    return bath.temperature * mech.gamma_m / ge


def t_peak(peak_height: float, omega_eff: float, mech: MechanicalParams, bath: BathParams) -> float:
    """Peak temperature from S_q at the effective resonance (dimensionless-q units)."""
    if not peak_height > 0:
        raise NonPositivePeak(f"peak height {peak_height!r} must be positive")
    return math.sqrt(peak_height * HBAR * mech.gamma_m * omega_eff ** 2 * bath.temperature
                     / (2.0 * KB * mech.omega_m))


def n_eff(q_var: float, p_var: float) -> float:
    return 0.5 * (q_var + p_var) - 0.5


def analytic_report(op: OperatingPoint, mech: MechanicalParams, bath: BathParams,
                    flat_thermal: bool = False) -> TemperatureReport:
    """All three estimators from the noise-free model spectrum."""
    q_var, p_var, err = variances(op, mech, bath, flat_thermal=flat_thermal)
    r = effective_dynamics(mech.omega_m, op, mech).scalar()
    sq = _integrand(op, mech, bath, flat_thermal)
    peak = sq(r.omega_eff)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EquipartitionWarning)
        ta = t_area(q_var, mech, p_var)
    return TemperatureReport(
        t_area=ta, t_gamma=t_gamma(op, mech, bath), t_peak=t_peak(peak, r.omega_eff, mech, bath),
        n_eff=n_eff(q_var, p_var), q_var=q_var, p_var=p_var, equipartition_ratio=q_var / p_var,
        inputs={"gamma_eff": r.gamma_eff, "omega_eff": r.omega_eff, "peak_height": peak,
                "delta": op.delta, "g": op.g, "integration_error": err})


def report_for(params: SystemParams, delta: float | None = None) -> TemperatureReport:
    op = operating_point(params, delta)
    return analytic_report(op, params.mech, params.bath)


def cooling_factor(op: OperatingPoint, mech: MechanicalParams) -> float:
    """T / T_eff^gamma = gamma_eff / gamma_m."""
    return gamma_eff(op, mech) / mech.gamma_m
