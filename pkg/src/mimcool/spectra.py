"""Displacement noise spectra and the probe detection chain.

Convention: spectra are two-sided in angular frequency and normalised so that
<dq^2> = int S_q(w) dw / 2pi over the whole real line. With that choice the
two-sided density per Hz coincides numerically with S(w = 2 pi f), and the
usual one-sided-per-Hz density is 2 S.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .params import HBAR, KB, BathParams, MechanicalParams, SystemParams
from .response import chi_eff, effective_dynamics
from .steady import OperatingPoint


class SpectrumError(ValueError):
    pass


class DivisionByZeroKappa1(SpectrumError):
    pass


@dataclass(frozen=True)
class SpectrumTrace:
    omega_grid: np.ndarray
    s_q: np.ndarray
    chi2: np.ndarray | None = None
    components: dict = field(default_factory=dict)   # thermal, radiation_pressure, absorption
    x_zpf: float = 1.0
    s_x_det: np.ndarray | None = None
    floor: np.ndarray | None = None     # detection term of s_x_det, m^2 per unit w/2pi
    shot_floor: float = 0.0             # floor at the calibration frequency
    shot_noise: float = 0.0             # S_s in phase units

    def one_sided_hz(self, which: str = "s_x_det"):
        """(freq_hz, 2 S) on the non-negative half of the grid."""
        vals = getattr(self, which)
        keep = self.omega_grid >= 0
        return self.omega_grid[keep] / (2 * np.pi), 2.0 * np.asarray(vals)[keep]


def _x_coth_x(x):
    x = np.abs(np.asarray(x, dtype=float))
    small = x < 1e-3
    xs = np.where(small, 0.0, x)
    big = xs / np.tanh(np.where(small, 1.0, xs))
    ser = 1.0 + x * x / 3.0 - x ** 4 / 45.0
    return np.where(small, ser, big)


def s_thermal(omega, mech: MechanicalParams, bath: BathParams, flat: bool = False):
    """Brownian force spectrum; ``flat`` gives the classical 2 gamma_m kT / hbar Omega_m."""
    w = np.asarray(omega, dtype=float)
    kt_over_hbar = KB * bath.temperature / HBAR
    classical = 2.0 * mech.gamma_m * kt_over_hbar / mech.omega_m
    if flat:
        return classical + 0.0 * w
    # (gamma w / Om) coth(hbar w / 2kT) = classical * x coth x, x = hbar w / 2kT
    return classical * _x_coth_x(w / (2.0 * kt_over_hbar))


def _den(w, op):
    k2 = op.kappa_T ** 2
    return (k2 + (w - op.delta) ** 2) * (k2 + (w + op.delta) ** 2)


def s_radiation_pressure(omega, op: OperatingPoint):
    w = np.asarray(omega, dtype=float)
    k = op.kappa_T
    return op.g ** 2 * k * (op.delta ** 2 + k * k + w * w) / _den(w, op)


def s_absorption(omega, op: OperatingPoint):
    w = np.asarray(omega, dtype=float)
    if op.gamma_abs == 0.0:
        return 0.0 * w
    if op.kappa1 <= 0.0:
        raise DivisionByZeroKappa1("absorption coupling is nonzero but kappa1 = 0")
    k, d = op.kappa_T, op.delta
    cross = op.gamma_abs * op.g * d * (d * d + k * k - w * w) / _den(w, op)
    return op.gamma_abs ** 2 / (4.0 * op.kappa1) + cross


def s_q(omega_grid, op: OperatingPoint, mech: MechanicalParams, bath: BathParams,
        flat_thermal: bool = False, x_zpf: float | None = None) -> SpectrumTrace:
    w = np.asarray(omega_grid, dtype=float)
    if w.ndim != 1 or (w.size > 1 and np.any(np.diff(w) <= 0)):
        raise SpectrumError("frequency grid must be one-dimensional and strictly increasing")
    th = s_thermal(w, mech, bath, flat=flat_thermal)
    rp = s_radiation_pressure(w, op)
    ab = s_absorption(w, op)
    chi2 = np.abs(chi_eff(w, op, mech)) ** 2
    total = chi2 * (th + rp + ab)
    if np.any(total < 0):
        raise SpectrumError("negative total spectrum; absorption cross term exceeds the noise sum")
    return SpectrumTrace(omega_grid=w, s_q=total, chi2=chi2,
                         components={"thermal": th, "radiation_pressure": rp, "absorption": ab},
                         x_zpf=mech.x_zpf if x_zpf is None else x_zpf)


def floor_transfer(omega, op: OperatingPoint, x_zpf: float):
    """Factor multiplying S_s in the calibrated spectrum."""
    if op.g_probe == 0.0:
        raise SpectrumError("probe coupling G_p is zero; the detection floor is undefined")
    w = np.asarray(omega, dtype=float)
    return (op.kappa_T ** 2 + w * w) / op.g_probe ** 2 * x_zpf ** 2


def calibrate_shot_noise(op: OperatingPoint, mech: MechanicalParams, floor_one_sided: float,
                         omega_cal: float | None = None) -> float:
    """S_s giving a one-sided floor of ``floor_one_sided`` m/sqrt(Hz) at omega_cal (default Omega_m)."""
    w = mech.omega_m if omega_cal is None else omega_cal
    target = 0.5 * floor_one_sided ** 2
    return target / float(floor_transfer(w, op, mech.x_zpf))


def detect(trace: SpectrumTrace, op: OperatingPoint, params: SystemParams,
           shot_noise: float | None = None) -> SpectrumTrace:
    """Calibrated detected spectrum x0^2 S_q + floor (m^2 per unit w/2pi)."""
    det = params.detection
    if shot_noise is None:
        shot_noise = det.shot_noise
    if shot_noise is None:
        shot_noise = calibrate_shot_noise(op, params.mech, det.shot_floor)
    x0 = trace.x_zpf
    floor = shot_noise * floor_transfer(trace.omega_grid, op, x0) if shot_noise else 0.0 * trace.s_q
    cal = shot_noise * float(floor_transfer(params.mech.omega_m, op, x0)) if shot_noise else 0.0
    return replace(trace, s_x_det=x0 * x0 * trace.s_q + floor, floor=floor,
                   shot_floor=cal, shot_noise=shot_noise)


def adaptive_grid(center: float, width: float, lo: float, hi: float,
                  n_coarse: int = 401, n_fine: int = 200, reach: float = 20.0) -> np.ndarray:
    """Uniform grid on [lo, hi] plus geometric refinement within center +- reach*width."""
    coarse = np.linspace(lo, hi, n_coarse)
    offs = width * np.geomspace(1e-3, reach, n_fine)
    fine = np.concatenate([center - offs, [center], center + offs])
    grid = np.unique(np.concatenate([coarse, fine[(fine >= lo) & (fine <= hi)]]))
    return grid


def default_grid(op: OperatingPoint, mech: MechanicalParams, span: float = 0.3, **kw) -> np.ndarray:
    r = effective_dynamics(mech.omega_m, op, mech).scalar()
    centre = r.omega_eff if np.isfinite(r.omega_eff) else mech.omega_m
    width = abs(r.gamma_eff) if r.gamma_eff != 0 else mech.gamma_m
    om = mech.omega_m
    return adaptive_grid(centre, width, (1 - span) * om, (1 + span) * om, **kw)


def uniform_window(op: OperatingPoint, mech: MechanicalParams, half_widths: float = 10.0,
                   bins_per_width: float = 20.0) -> np.ndarray:
    """Evenly spaced analyser-style grid over Omega_eff +- half_widths * gamma_eff."""
    r = effective_dynamics(mech.omega_m, op, mech).scalar()
    n = int(2 * half_widths * bins_per_width) + 1
    return np.linspace(r.omega_eff - half_widths * r.gamma_eff,
                       r.omega_eff + half_widths * r.gamma_eff, n)

