"""Classical working point of the driven membrane and its linearised couplings.

Substituting the intracavity photon number into the force balance leaves a
scalar fixed-point problem in the static deflection q_s::

    q = -d_q omega(q) E^2 / (Omega_m [kappa_T(q)^2 + Delta(q)^2])

which can have one or three solutions (optical bistability). Roots are
bracketed by a dense scan and polished with Brent's method.

Two detuning conventions are supported. With ``laser_offset`` given the laser
is fixed at omega(0) - laser_offset and Delta(q) varies with the deflection. By
default the effective detuning Delta = omega(q_s) - omega_L is held at the
requested value and omega_L is inferred afterwards, which is how detuning
sweeps are parametrised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .params import SystemParams
from .slab import LocalOptics, OpticalResponse, cavity_mode, direct_response


class SteadyStateError(RuntimeError):
    pass


class NoConvergence(SteadyStateError):
    pass


class BracketTooNarrow(SteadyStateError):
    pass


@dataclass(frozen=True)
class OperatingPoint:
    q_s: float
    alpha_s: float
    delta: float
    kappa_T: float
    kappa1: float = 0.0
    g: float = 0.0
    g_probe: float = 0.0
    h: float = 0.0
    gamma_abs: float = 0.0
    stable: bool = True
    omega_cav: float = 0.0
    omega_laser: float = 0.0
    dq_omega: float = 0.0
    laser_offset: float = 0.0   # omega_cav(q=0) - omega_laser, kept separately for precision

    @classmethod
    def from_couplings(cls, g: float, delta: float, kappa_T: float, h: float = 0.0,
                       gamma_abs: float = 0.0, kappa1: float = 0.0, g_probe: float = 0.0):
        """Operating point specified directly by its linearised coefficients."""
        return cls(q_s=0.0, alpha_s=0.0, delta=delta, kappa_T=kappa_T, kappa1=kappa1, g=g,
                   g_probe=g_probe, h=h, gamma_abs=gamma_abs)


# ---------------------------------------------------------------------------
# optics resolution

def optical_response(params: SystemParams) -> tuple[SystemParams, OpticalResponse]:
    """Optical derivatives at the membrane position, before any coupling targets.

    In slab mode the requested total linewidth is re-split as
    kappa0 = kappa2 = (kappa_T - kappa1)/2 with kappa1 from the slab.
    """
    spec = params.optics
    if spec.mode == "slab":
        resp = cavity_mode(params.cavity, params.membrane, params.drive.wavelength)
        if params.cavity.kappa_total is not None:
            params = params.with_(kappa1_rad_s=resp.kappa1)
        return params, resp
    omega_c = params.cavity.omega0(params.drive.wavelength)
    return params, direct_response(spec.d_omega_dz, spec.d2_omega_dz2, spec.kappa1,
                                   spec.d_kappa1_dz, omega=omega_c)


def prepare(params: SystemParams) -> tuple[SystemParams, LocalOptics]:
    """Resolve the optics model, tuning direct-mode targets when the pump is on."""
    params, resp = optical_response(params)
    spec = params.optics
    targets = spec.g_target is not None or spec.h_target is not None
    if spec.mode == "direct" and targets and params.drive.power > 0:
        resp = tune_direct(params, resp, spec.g_target, spec.h_target)
        params = params.with_(d_omega_dz=resp.d_omega_dz, d2_omega_dz2=resp.d2_omega_dz2,
                              g_target=None, h_target=None)
    return params, resp.local_model(params.mech.x_zpf, params.mech.overlap)


def tune_direct(params: SystemParams, resp: OpticalResponse, g_target=None, h_target=None,
                delta_ref: float | None = None, iterations: int = 4) -> OpticalResponse:
    """Set d omega/dz and d2 omega/dz2 so that G and h hit the targets at delta_ref.

    Targets are G/Omega_m and h/Omega_m; the reference detuning defaults to
    Omega_m. A few fixed-point passes absorb the (tiny) static deflection.
    """
    mech = params.mech
    om = mech.omega_m
    delta_ref = om if delta_ref is None else delta_ref
    lq = mech.x_zpf * mech.overlap
    kT = params.cavity.kappa0 + params.cavity.kappa2 + resp.kappa1
    alpha = params.drive_amplitude / math.hypot(kT, delta_ref)
    if alpha == 0.0 or lq == 0.0:
        raise SteadyStateError("cannot tune couplings with zero drive or zero overlap")
    d1 = resp.d_omega_dz if g_target is None else -g_target * om / (math.sqrt(2.0) * lq * alpha)
    d2 = resp.d2_omega_dz2 if h_target is None else h_target * om / (lq * lq * alpha * alpha)
    resp = replace(resp, d_omega_dz=d1, d2_omega_dz2=d2)
    for _ in range(iterations):
        op = solve_at(params, resp.local_model(mech.x_zpf, mech.overlap), delta_ref)
        if g_target is not None and op.g != 0.0:
            d1 *= g_target * om / op.g
        if h_target is not None and op.h != 0.0:
            d2 *= h_target * om / op.h
        resp = replace(resp, d_omega_dz=d1, d2_omega_dz2=d2)
    return resp


# ---------------------------------------------------------------------------
# fixed point

def _residual_factory(params: SystemParams, optics: LocalOptics, laser_offset, delta):
    om = params.mech.omega_m
    e2 = params.drive_amplitude ** 2
    k02 = params.cavity.kappa0 + params.cavity.kappa2

    def detuning(q):
        if laser_offset is None:
            return delta + 0.0 * q
        return laser_offset + optics.shift(q)

    def phi(q):
        kt = k02 + optics.kappa1(q)
        return -optics.dq_omega(q) * e2 / (om * (kt * kt + detuning(q) ** 2))

    def residual(q):
        return q - phi(q)

    return residual, phi, detuning


def _q_scale(params, optics, laser_offset, delta):
    # fixed laser: bound by the resonant photon number
    e2 = params.drive_amplitude ** 2
    kt = params.cavity.kappa0 + params.cavity.kappa2 + optics.kappa1(0.0)
    den = kt * kt + (0.0 if laser_offset is not None else delta ** 2)
    return abs(optics.dq_omega(0.0)) * e2 / (params.mech.omega_m * den)


def _scan_roots(residual, lo, hi, n_scan):
    grid = np.linspace(lo, hi, n_scan)
    vals = residual(grid)
    roots = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)[0]:
        a, b = float(grid[i]), float(grid[i + 1])
        fa, fb = float(residual(a)), float(residual(b))
        if fa == 0.0:
            roots.append(a)
            continue
        if fa * fb > 0:
            continue
        try:
            roots.append(brentq(residual, a, b, xtol=1e-15 * max(abs(lo), abs(hi), 1.0),
                                rtol=4 * np.finfo(float).eps, maxiter=500))
        except (RuntimeError, ValueError) as exc:
            raise NoConvergence(f"root polish failed in [{a}, {b}]: {exc}") from exc
    return sorted(set(roots))


def solve_steady(params: SystemParams, optics: LocalOptics | None = None,
                 laser_offset: float | None = None, delta: float | None = None,
                 q_range: tuple[float, float] | None = None, n_scan: int = 2048) -> list[OperatingPoint]:
    """All stationary solutions, each tagged stable/unstable by the map slope.

    Exactly one of the detuning conventions applies: a fixed laser frequency
    (``laser_offset`` = omega(q=0) - omega_L) or a fixed effective detuning (``delta``, defaulting
    to ``params.drive.detuning``).
    """
    if optics is None:
        params, optics = prepare(params)
    if laser_offset is None and delta is None:
        delta = params.drive.detuning
    residual, phi, detuning = _residual_factory(params, optics, laser_offset, delta)

    if params.drive.power == 0.0:
        return [couplings(_bare_point(params, optics, 0.0, float(detuning(0.0)), True),
                          params, optics)]

    scale = _q_scale(params, optics, laser_offset, delta)
    auto = 5.0 * max(scale, 1e-6)
    lo, hi = (-auto, auto) if q_range is None else q_range
    roots = _scan_roots(residual, lo, hi, n_scan)
    if q_range is not None and (lo > -auto or hi < auto):
        outside = [r for r in _scan_roots(residual, -auto, auto, n_scan) if not lo <= r <= hi]
        if outside:
            raise BracketTooNarrow(f"root(s) {outside} lie outside q_range={q_range}")
    if not roots:
        raise NoConvergence("no stationary solution found in the scan window")

    out = []
    for q in roots:
        step = 1e-7 * max(abs(q), scale, 1e-9)
        slope = (residual(q + step) - residual(q - step)) / (2 * step)
        op = _bare_point(params, optics, q, float(detuning(q)), bool(slope > 0))
        out.append(couplings(op, params, optics))
    return out


def _bare_point(params, optics, q, delta, stable):
    kt = params.cavity.kappa0 + params.cavity.kappa2 + float(optics.kappa1(q))
    alpha = params.drive_amplitude / math.hypot(kt, delta)
    offset = delta - float(optics.shift(q))
    return OperatingPoint(q_s=float(q), alpha_s=alpha, delta=delta, kappa_T=kt,
                          kappa1=float(optics.kappa1(q)), stable=stable,
                          omega_cav=float(optics.omega(q)), omega_laser=optics.omega_c - offset,
                          dq_omega=float(optics.dq_omega(q)), laser_offset=offset)


def couplings(op: OperatingPoint, params: SystemParams, optics: LocalOptics) -> OperatingPoint:
    """Fill G, G_p, h and Gamma at the stationary point."""
    a = op.alpha_s
    q = op.q_s
    d = params.drive
    mech = params.mech
    g = -math.sqrt(2.0) * float(optics.dq_omega(q)) * a
    h = float(optics.d2q_omega(q)) * a * a
    gam = math.sqrt(2.0) * float(optics.dq_kappa1(q)) * a
    kp = params.cavity.kappa0 if d.probe_kappa is None else d.probe_kappa
    dwdz = float(optics.dz_omega(q))
    gp = -2.0 * dwdz * d.probe_overlap * math.sqrt(
        d.probe_power * kp / (mech.mass * mech.omega_m * d.omega_laser * op.kappa_T ** 2))
    return replace(op, g=g, h=h, gamma_abs=gam, g_probe=gp)


def g_expanded(op: OperatingPoint, params: SystemParams, optics: LocalOptics) -> float:
    """G written in terms of input power and d omega/dz0 instead of alpha_s."""
    mech, d = params.mech, params.drive
    dwdz = float(optics.dz_omega(op.q_s))
    return -2.0 * dwdz * mech.overlap * math.sqrt(
        d.power * params.cavity.kappa0
        / (mech.mass * mech.omega_m * d.omega_laser * (op.kappa_T ** 2 + op.delta ** 2)))


def solve_at(params: SystemParams, optics: LocalOptics | None = None,
             delta: float | None = None) -> OperatingPoint:
    """The stable solution at fixed effective detuning (the usual sweep case)."""
    pts = solve_steady(params, optics, delta=delta)
    stable = [p for p in pts if p.stable]
    if not stable:
        raise SteadyStateError("no stable stationary solution")
    return min(stable, key=lambda p: abs(p.q_s))


def operating_point(params: SystemParams, delta: float | None = None) -> OperatingPoint:
    params, optics = prepare(params)
    return solve_at(params, optics, delta)


def stationary_residuals(op: OperatingPoint, params: SystemParams, optics: LocalOptics):
    """Relative residuals of the force balance and the photon-number condition."""
    om = params.mech.omega_m
    e2 = params.drive_amplitude ** 2
    q = op.q_s
    r1 = q + float(optics.dq_omega(q)) * op.alpha_s ** 2 / om
    kt = params.cavity.kappa0 + params.cavity.kappa2 + float(optics.kappa1(q))
    detuning = op.laser_offset + float(optics.shift(q))
    n_ph = e2 / (kt ** 2 + detuning ** 2)
    r2 = op.alpha_s ** 2 - n_ph
    return abs(r1) / max(abs(q), 1e-300), abs(r2) / n_ph
