"""Synthetic analyser spectra and Lorentzian peak fits.

A spectrum analyser averaging M periodograms returns, per bin, the true PSD
times a chi-squared variable with 2M degrees of freedom divided by 2M. The
fit model is floor + height / (1 + 4 (w - center)^2 / fwhm^2), weighted by
the model itself (sigma = model / sqrt(M)) and re-weighted until stable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

from .params import HBAR, KB, BathParams, MechanicalParams


class FitError(RuntimeError):
    pass


class NoPeakFound(FitError):
    pass


class FitDiverged(FitError):
    pass


@dataclass(frozen=True)
class NoisySpectrum:
    omega_grid: np.ndarray
    values: np.ndarray
    snapshots: int
    seed: int
    truth: np.ndarray


@dataclass(frozen=True)
class FitResult:
    center: float
    fwhm: float
    height: float
    area: float          # integral of the Lorentzian over w (not w/2pi)
    floor: float
    residual_rms: float
    chi2_dof: float
    covariance: np.ndarray   # order: center, fwhm, height, area, floor

    PARAMS = ("center", "fwhm", "height", "area", "floor")

    def sigma(self, name: str) -> float:
        i = self.PARAMS.index(name)
        return float(math.sqrt(max(self.covariance[i, i], 0.0)))


def point_seed(base_seed: int, index: int) -> np.random.SeedSequence:
    """Independent, order-free RNG stream for sweep point ``index``."""
    return np.random.SeedSequence([int(base_seed), int(index)])


def synth_spectrum(omega_grid, psd, snapshots: int, seed) -> NoisySpectrum:
    """Averaged-periodogram noise on ``psd``; ``seed`` is an int or a SeedSequence."""
    if snapshots < 1:
        raise ValueError("snapshots must be >= 1")
    rng = np.random.default_rng(seed)
    psd = np.asarray(psd, dtype=float)
    draws = rng.gamma(shape=snapshots, scale=1.0 / snapshots, size=psd.shape)
    return NoisySpectrum(np.asarray(omega_grid, dtype=float), psd * draws, snapshots, seed, psd)


def lorentzian(w, center, fwhm, height, floor):
    return floor + height / (1.0 + 4.0 * ((w - center) / fwhm) ** 2)


def _initial_guess(w, y):
    n = len(y)
    edge = max(n // 10, 2)
    floor = float(np.median(np.concatenate([y[:edge], y[-edge:]])))
    i = int(np.argmax(y))
    height = float(y[i] - floor)
    excess = np.clip(y - floor, 0.0, None)
    area = float(np.trapezoid(excess, w))
    fwhm = 2.0 * area / (math.pi * height) if height > 0 else (w[-1] - w[0]) / 10
    fwhm = float(np.clip(fwhm, 2 * np.min(np.diff(w)), w[-1] - w[0]))
    return float(w[i]), fwhm, height, floor


def fit_lorentzian(omega_grid, values, snapshots: int | None = None,
                   window: tuple[float, float] | None = None, reweight: int = 4) -> FitResult:
    """Weighted least-squares Lorentzian-plus-floor fit.

    ``window`` restricts the bins used (rad/s). With ``snapshots`` the per-bin
    sigma is model / sqrt(snapshots) and the covariance is absolute; without
    it the weights are relative and the covariance is scaled by chi2/dof.
    """
    w = np.asarray(omega_grid, dtype=float)
    y = np.asarray(values, dtype=float)
    if window is not None:
        keep = (w >= window[0]) & (w <= window[1])
        w, y = w[keep], y[keep]
    if len(w) < 8:
        raise NoPeakFound("fewer than 8 bins in the fit window")
    c0, f0, h0, fl0 = _initial_guess(w, y)
    # floor from the window edges, so non-uniform grids dense at the peak still work
    m = snapshots if snapshots else None
    thresh = fl0 * (1.0 + (math.log(len(y)) + 4.0) / math.sqrt(m)) if m else fl0 * 1.5
    if not (h0 > 0 and y.max() > thresh):
        raise NoPeakFound("no bin rises significantly above the edge floor")

    # scaled parameters: (center - c0)/f0, log(fwhm/f0), height/h0, floor/h0
    def unpack(x):
        return c0 + x[0] * f0, f0 * math.exp(x[1]), x[2] * h0, x[3] * h0

    def model(x):
        c, f, h, fl = unpack(x)
        return lorentzian(w, c, f, h, fl)

    x = np.array([0.0, 0.0, 1.0, fl0 / h0])
    sigma = np.maximum(y, 1e-300 * h0) if m else np.ones_like(y) * h0
    res = None
    for _ in range(max(reweight, 1)):
        res = least_squares(lambda x: (model(x) - y) / sigma, x, method="lm",
                            xtol=1e-10, ftol=1e-12, gtol=1e-12, max_nfev=20000)
        if not res.success or not np.all(np.isfinite(res.x)):
            raise FitDiverged(f"least squares failed: {res.message}")
        x = res.x
        if m:
            sigma = model(x) / math.sqrt(m)
            if np.any(sigma <= 0):
                raise FitDiverged("model went non-positive")
    c, f, h, fl = unpack(x)
    if not (f > 0 and h > 0 and np.isfinite([c, f, h, fl]).all()):
        raise FitDiverged("fit converged to a non-physical line")
    r = (model(x) - y) / sigma
    dof = max(len(y) - 4, 1)
    chi2_dof = float(r @ r / dof)

    J = res.jac
    try:
        cov_x = np.linalg.inv(J.T @ J)
    except np.linalg.LinAlgError as exc:
        raise FitDiverged("singular Jacobian") from exc
    if not m:
        cov_x *= chi2_dof
    # d(center, fwhm, height, area, floor)/d(x)
    T = np.zeros((5, 4))
    T[0, 0] = f0
    T[1, 1] = f
    T[2, 2] = h0
    T[3, 1] = math.pi * h * f / 2.0
    T[3, 2] = math.pi * f / 2.0 * h0
    T[4, 3] = h0
    cov = T @ cov_x @ T.T
    if not (h > 3.0 * math.sqrt(cov[2, 2])):
        raise NoPeakFound("fitted peak height is not significant")
    rms = float(np.sqrt(np.mean(((model(x) - y) / np.maximum(model(x), 1e-300)) ** 2)))
    return FitResult(center=c, fwhm=f, height=h, area=math.pi * h * f / 2.0, floor=fl,
                     residual_rms=rms, chi2_dof=chi2_dof, covariance=cov)


@dataclass(frozen=True)
class FitTemperatures:
    t_area: float
    t_gamma: float
    t_peak: float
    sigma_area: float
    sigma_gamma: float
    sigma_peak: float
    pair_sigma: dict     # sigma of T_i - T_j including the fit correlations

    def max_pair_z(self, correlated: bool = False) -> float:
        """Largest |T_i - T_j| / sigma_ij.

        By default sigma_ij = sqrt(sigma_i^2 + sigma_j^2), the usual test of two
        quoted values agreeing within their own uncertainties; ``correlated``
        uses the full delta-method sigma of the difference instead.
        """
        vals = {"area": (self.t_area, self.sigma_area), "gamma": (self.t_gamma, self.sigma_gamma),
                "peak": (self.t_peak, self.sigma_peak)}
        out = 0.0
        for (a, b), s_corr in self.pair_sigma.items():
            s = s_corr if correlated else math.hypot(vals[a][1], vals[b][1])
            out = max(out, abs(vals[a][0] - vals[b][0]) / s)
        return out


def fit_temperatures(fit: FitResult, mech: MechanicalParams, bath: BathParams,
                     x_zpf: float) -> FitTemperatures:
    """Three temperature estimates from a fit of a calibrated (m^2) spectrum.

    The Lorentzian area over w, divided by pi, is the variance (both signs of
    frequency); heights are converted to q units with x_zpf^2.
    """
    x2 = x_zpf * x_zpf
    om, gm, T = mech.omega_m, mech.gamma_m, bath.temperature
    a = HBAR * om / (KB * math.pi * x2)
    t_area = a * fit.area
    t_gamma = T * gm / fit.fwhm
    b = HBAR * gm * T / (2.0 * KB * om * x2)
    t_peak = math.sqrt(b * fit.height) * fit.center
    # gradients wrt (center, fwhm, height, area, floor)
    g_area = np.array([0, 0, 0, a, 0])
    g_gamma = np.array([0, -t_gamma / fit.fwhm, 0, 0, 0])
    g_peak = np.array([t_peak / fit.center, 0, t_peak / (2 * fit.height), 0, 0])
    C = fit.covariance
    grads = {"area": g_area, "gamma": g_gamma, "peak": g_peak}
    sig = {k: float(math.sqrt(max(v @ C @ v, 0.0))) for k, v in grads.items()}
    pairs = {}
    for i, j in (("area", "gamma"), ("area", "peak"), ("gamma", "peak")):
        d = grads[i] - grads[j]
        pairs[(i, j)] = float(math.sqrt(max(d @ C @ d, 1e-300)))
    return FitTemperatures(t_area, t_gamma, t_peak, sig["area"], sig["gamma"], sig["peak"], pairs)


def floor_subtracted_area(omega_grid, values, floor: float) -> float:
    """Trapezoid integral of (values - floor) over w."""
    return float(np.trapezoid(np.asarray(values) - floor, omega_grid))
