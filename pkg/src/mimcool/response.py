"""Back-action-dressed mechanical response.

The cavity adds a retarded self-force to the oscillator, so the bare
Lorentzian becomes

    chi(w) = Omega_m / (Omega~^2 - w^2 - i w gamma_m - Sigma(w)),
    Sigma(w) = G Omega_m [G Delta - Gamma (kappa - i w)] / [(kappa - i w)^2 + Delta^2]

with Omega~^2 = Omega_m^2 + h Omega_m. Re(Sigma) is the optical spring and
Im(Sigma)/w the optical damping; ``effective_dynamics`` returns both in
closed form. The 4x4 drift matrix of the linear fluctuation equations in
quadratures (dq, dp, dX, dY) is built here too, for eigenvalue stability and
for the time-domain oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .params import MechanicalParams
from .steady import OperatingPoint


@dataclass(frozen=True)
class InstabilityIndicator:
    negative_radicand: bool = False   # Omega_eff^2 < 0 somewhere on the grid
    anti_damped: bool = False         # gamma_eff <= 0 somewhere on the grid

    @property
    def unstable(self) -> bool:
        return self.negative_radicand or self.anti_damped


@dataclass(frozen=True)
class EffectiveResponse:
    omega: np.ndarray
    chi_eff: np.ndarray
    omega_eff_sq: np.ndarray
    omega_eff: np.ndarray     # nan where omega_eff_sq < 0, flagged in ``indicator``
    gamma_eff: np.ndarray
    omega_tilde_sq: float
    indicator: InstabilityIndicator

    def scalar(self) -> "EffectiveResponse":
        """Collapse 0-d arrays to floats for single-frequency evaluations."""
        def f(x):
            return x.item() if np.ndim(x) == 0 else x
        return EffectiveResponse(f(self.omega), f(self.chi_eff), f(self.omega_eff_sq),
                                 f(self.omega_eff), f(self.gamma_eff), self.omega_tilde_sq,
                                 self.indicator)


def omega_tilde_sq(op: OperatingPoint, mech: MechanicalParams) -> float:
    return mech.omega_m ** 2 + op.h * mech.omega_m


def self_energy(omega, op: OperatingPoint, mech: MechanicalParams):
    w = np.asarray(omega, dtype=float)
    s = op.kappa_T - 1j * w
    return op.g * mech.omega_m * (op.g * op.delta - op.gamma_abs * s) / (s * s + op.delta ** 2)


def chi_eff(omega, op: OperatingPoint, mech: MechanicalParams):
    w = np.asarray(omega, dtype=float)
    den = omega_tilde_sq(op, mech) - w * w - 1j * w * mech.gamma_m - self_energy(w, op, mech)
    return mech.omega_m / den


def chi_bare(omega, mech: MechanicalParams):
    w = np.asarray(omega, dtype=float)
    return mech.omega_m / (mech.omega_m ** 2 - w * w - 1j * w * mech.gamma_m)


def _lorentz_den(w, op):
    k2 = op.kappa_T ** 2
    return (k2 + (w - op.delta) ** 2) * (k2 + (w + op.delta) ** 2)


def spring_term(omega, op: OperatingPoint, mech: MechanicalParams):
    """Back-action contribution subtracted from Omega~^2 (real part of Sigma)."""
    w = np.asarray(omega, dtype=float)
    k, d, g, gam = op.kappa_T, op.delta, op.g, op.gamma_abs
    num = g * d * (k * k - w * w + d * d) - gam * k * (k * k + w * w + d * d)
    return g * mech.omega_m * num / _lorentz_den(w, op)


def optical_damping(omega, op: OperatingPoint, mech: MechanicalParams):
    """gamma_eff - gamma_m."""
    w = np.asarray(omega, dtype=float)
    k, d, g, gam = op.kappa_T, op.delta, op.g, op.gamma_abs
    num = 2.0 * g * d * k - gam * (k * k + w * w - d * d)
    return g * mech.omega_m * num / _lorentz_den(w, op)


def effective_dynamics(omega, op: OperatingPoint, mech: MechanicalParams) -> EffectiveResponse:
    w = np.asarray(omega, dtype=float)
    wt2 = omega_tilde_sq(op, mech)
    oe2 = wt2 - spring_term(w, op, mech)
    ge = mech.gamma_m + optical_damping(w, op, mech)
    neg = oe2 < 0
    oe = np.sqrt(np.where(neg, np.nan, oe2))
    ind = InstabilityIndicator(negative_radicand=bool(np.any(neg)), anti_damped=bool(np.any(ge <= 0)))
    return EffectiveResponse(w, chi_eff(w, op, mech), oe2, oe, ge, wt2, ind)


def at_resonance(op: OperatingPoint, mech: MechanicalParams) -> EffectiveResponse:
    """Weak-coupling reporting point: everything evaluated at w = Omega_m."""
    return effective_dynamics(mech.omega_m, op, mech).scalar()


def gamma_eff(op: OperatingPoint, mech: MechanicalParams, omega: float | None = None) -> float:
    w = mech.omega_m if omega is None else omega
    return float(mech.gamma_m + optical_damping(w, op, mech))


def omega_eff(op: OperatingPoint, mech: MechanicalParams, omega: float | None = None) -> float:
    """Effective frequency; nan if the radicand is negative (see ``effective_dynamics``)."""
    w = mech.omega_m if omega is None else omega
    return float(effective_dynamics(w, op, mech).omega_eff)


def omega_eff_shift(op: OperatingPoint, mech: MechanicalParams, omega: float | None = None) -> float:
    """Omega_eff - Omega_m without cancellation: (Oeff^2 - Om^2)/(Oeff + Om)."""
    w = mech.omega_m if omega is None else omega
    om = mech.omega_m
    d2 = op.h * om - float(spring_term(w, op, mech))
    return d2 / (np.sqrt(om * om + d2) + om)


# ---------------------------------------------------------------------------
# linear system in quadratures

def drift_matrix(op: OperatingPoint, mech: MechanicalParams) -> np.ndarray:
    """Drift A of d/dt (dq, dp, dX, dY) = A (...) + noise, dX + i dY = sqrt(2) da."""
    om, gm = mech.omega_m, mech.gamma_m
    k, d, g, gam = op.kappa_T, op.delta, op.g, op.gamma_abs
    return np.array([
        [0.0, om, 0.0, 0.0],
        [-(om + op.h), -gm, g, 0.0],
        [-gam, 0.0, -k, d],
        [g, 0.0, -d, -k],
    ])


def diffusion_matrix(op: OperatingPoint, mech: MechanicalParams, n_thermal: float,
                     optical_noise: bool = True) -> np.ndarray:
    """Symmetrised white-noise diffusion, <xi_i(t) xi_j(t')> = D_ij delta(t - t').

    Thermal force 2 gamma_m n on dp (classical limit). Vacuum noise enters
    dX, dY with strength kappa_T; the absorption channel adds a dp-dY
    correlation. ``optical_noise=False`` keeps only the Gamma channel on dp.
    """
    D = np.zeros((4, 4))
    D[1, 1] = 2.0 * mech.gamma_m * n_thermal
    if op.gamma_abs != 0.0:
        if op.kappa1 <= 0.0:
            raise ZeroDivisionError("absorption coupling with kappa1 = 0")
        D[1, 1] += op.gamma_abs ** 2 / (4.0 * op.kappa1)
        if optical_noise:
            D[1, 3] = D[3, 1] = op.gamma_abs / 2.0
    if optical_noise:
        D[2, 2] = D[3, 3] = op.kappa_T
    return D


def eigenvalues(op: OperatingPoint, mech: MechanicalParams) -> np.ndarray:
    return np.linalg.eigvals(drift_matrix(op, mech))


def full_stability(op: OperatingPoint, mech: MechanicalParams) -> bool:
    return bool(np.all(eigenvalues(op, mech).real < 0))


def routh_hurwitz(op: OperatingPoint, mech: MechanicalParams) -> bool:
    """Hurwitz determinants of the characteristic quartic (independent of eig).

    Coefficients are rescaled to s = Omega_m u so the test is well conditioned.
    """
    A = drift_matrix(op, mech) / mech.omega_m
    c = np.poly(A)  # 1, a1, a2, a3, a4
    a1, a2, a3, a4 = c[1:]
    h2 = a1 * a2 - a3
    h3 = a3 * h2 - a1 * a1 * a4
    return bool(a1 > 0 and h2 > 0 and h3 > 0 and a4 > 0)


def optimal_detuning(op: OperatingPoint, mech: MechanicalParams, fixed_power: bool = True,
                     upper: float | None = None) -> float:
    """Detuning maximising gamma_eff(Omega_m).

    With ``fixed_power`` G follows the intracavity amplitude,
    G(Delta) = G(Delta_0) sqrt[(kappa^2 + Delta_0^2)/(kappa^2 + Delta^2)];
    otherwise G is held fixed.
    """
    om = mech.omega_m
    k = op.kappa_T
    upper = 3.0 * (om + k) if upper is None else upper
    base = k * k + op.delta ** 2

    def neg_gamma(d):
        g = op.g * np.sqrt(base / (k * k + d * d)) if fixed_power else op.g
        probe = OperatingPoint(q_s=op.q_s, alpha_s=op.alpha_s, delta=d, kappa_T=k, g=g, h=op.h)
        return -gamma_eff(probe, mech)

    grid = np.linspace(0.0, upper, 513)[1:]
    vals = np.array([neg_gamma(d) for d in grid])
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    res = minimize_scalar(neg_gamma, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-10 * om})
    return float(res.x)
