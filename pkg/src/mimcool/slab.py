"""Membrane-in-the-middle optics from 1-D transfer matrices.

The cavity is two ideal mirrors a distance ``L`` apart with a homogeneous
dielectric slab (thickness ``L_d``, index ``n_R + i n_I``) centred at
``z0`` (measured from the cavity midpoint). The resonance condition of the
compound cavity is written as a real function of the frequency offset
``eps = omega - omega0`` from the empty-cavity mode, so all phases stay of
order one and the root is resolved to ~1e-7 rad/s.

The z0-dependent part of the round-trip phase is evaluated at the pump
wavenumber 2*pi/lambda. This makes omega(z0) exactly periodic in lambda/2;
the neglected term is of relative order (omega - omega_L)/omega_L ~ 1e-6.

Absorption enters through the imaginary part of the resonance. Because the
lossless frequency is analytic in the index, ``Im delta omega`` is obtained
to first order as ``n_I * d omega / d n_R``; :func:`complex_resonance`
solves the full complex problem for validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, newton

from .params import C_LIGHT, CavityParams, MembraneParams


class OpticsError(RuntimeError):
    pass


class NoRootInBracket(OpticsError):
    pass


class DegenerateCrossing(OpticsError):
    pass


@dataclass(frozen=True)
class MembraneMatrix:
    r: complex
    t: complex

    @property
    def matrix(self) -> np.ndarray:
        """Transfer matrix mapping (forward, backward) amplitudes across the slab."""
        r, t = self.r, self.t
        return np.array([[t * t - r * r, r], [-r, 1.0]], dtype=complex) / t

    @property
    def reflectance(self) -> float:
        return abs(self.r) ** 2


def slab_rt(n, thickness, k):
    """Amplitude r, t of a symmetric slab in vacuum (Airy formulas, vectorised in k)."""
    r01 = (1.0 - n) / (1.0 + n)
    ph = np.exp(2j * n * k * thickness)
    den = 1.0 - r01 * r01 * ph
    r = r01 * (1.0 - ph) / den
    t = (1.0 - r01 * r01) * np.exp(1j * n * k * thickness) / den
    return r, t


def membrane_rt(membrane: MembraneParams, k: float) -> MembraneMatrix:
    if not k > 0:
        raise ValueError("wavenumber must be positive")
    n = membrane.n_real + 1j * membrane.n_imag
    r, t = slab_rt(n, membrane.thickness, k)
    return MembraneMatrix(complex(r), complex(t))


@dataclass(frozen=True)
class OpticalResponse:
    """Cavity frequency and absorption rate at one membrane position."""

    z0: float
    omega: float
    shift: float              # omega - omega0, carried separately for precision
    d_omega_dz: float
    d2_omega_dz2: float
    kappa1: float
    d_kappa1_dz: float

    def local_model(self, x_zpf: float, overlap: float = 1.0) -> "LocalOptics":
        return LocalOptics(self, x_zpf * overlap)


class LocalOptics:
    """Taylor model of omega and kappa1 in the dimensionless coordinate q.

    ``z = z0 + x0 * Theta * q``; omega is kept to second order, kappa1 to
    first. Membrane deflections are many orders below the optical scale, so
    the truncation is exact for practical purposes.
    """

    def __init__(self, resp: OpticalResponse, length_per_q: float):
        self.resp = resp
        self.lq = length_per_q
        self.omega_c = resp.omega
        self.a1 = resp.d_omega_dz * length_per_q
        self.a2 = resp.d2_omega_dz2 * length_per_q ** 2
        self.k0 = resp.kappa1
        self.k1 = resp.d_kappa1_dz * length_per_q

    def shift(self, q):
        """omega(q) - omega(0)."""
        return self.a1 * q + 0.5 * self.a2 * q * q

    def omega(self, q):
        return self.omega_c + self.shift(q)

    def dq_omega(self, q):
        return self.a1 + self.a2 * q

    def d2q_omega(self, q):
        return self.a2 + 0.0 * q

    def kappa1(self, q):
        return self.k0 + self.k1 * q

    def dq_kappa1(self, q):
        return self.k1 + 0.0 * q

    def dz_omega(self, q):
        """d omega / d z0 at the displaced position."""
        return self.dq_omega(q) / self.lq if self.lq else self.resp.d_omega_dz


def direct_response(d_omega_dz: float, d2_omega_dz2: float = 0.0, kappa1: float = 0.0,
                    d_kappa1_dz: float = 0.0, omega: float = 0.0, z0: float = 0.0) -> OpticalResponse:
    """User-supplied derivatives, bypassing the slab model."""
    return OpticalResponse(z0=z0, omega=omega, shift=0.0, d_omega_dz=d_omega_dz,
                           d2_omega_dz2=d2_omega_dz2, kappa1=kappa1, d_kappa1_dz=d_kappa1_dz)


# ---------------------------------------------------------------------------
# resonance condition

class _Geometry:
    def __init__(self, cavity: CavityParams, membrane: MembraneParams, wavelength: float):
        self.L = cavity.length
        self.fsr = cavity.fsr
        self.mode = cavity.mode_number(wavelength)
        self.omega0 = self.mode * self.fsr
        self.k0 = self.omega0 / C_LIGHT
        self.k_ref = 2.0 * math.pi / wavelength
        self.thickness = membrane.thickness
        self.base = 0.5 * (self.L - membrane.thickness)
        self.parity = math.pi * (self.mode % 2)

    def phases(self, eps, z0):
        # 2 k d_j with k = k0 + eps/c and d_{1,2} = base +/- z0;
        # 2 k0 base = q pi - k0 L_d is reduced exactly
        common = self.parity - self.k0 * self.thickness + 2.0 * (eps / C_LIGHT) * self.base
        return common + 2.0 * self.k_ref * z0, common - 2.0 * self.k_ref * z0

    def characteristic(self, eps, z0, n, mirror_r=-1.0):
        """D(eps) = (1 - r rho1)(1 - r rho2) - t^2 rho1 rho2; zero on resonance."""
        k = self.k0 + eps / C_LIGHT
        r, t = slab_rt(n, self.thickness, k)
        p1, p2 = self.phases(eps, z0)
        rho1, rho2 = mirror_r * np.exp(1j * p1), mirror_r * np.exp(1j * p2)
        return (1.0 - r * rho1) * (1.0 - r * rho2) - t * t * rho1 * rho2, t, p1, p2

    def real_condition(self, eps, z0, n_real):
        """Real-valued resonance function for a lossless slab and ideal mirrors."""
        d, t, p1, p2 = self.characteristic(eps, z0, n_real)
        # D e^{-i psi} is purely imaginary when everything is lossless
        psi = np.angle(t) + 0.5 * (p1 + p2) + math.pi
        return np.imag(d * np.exp(-1j * psi))


def _roots(geo: _Geometry, z0: float, n_real: float, span: float = 1.5, per_fsr: int = 96):
    grid = np.linspace(-span * geo.fsr, span * geo.fsr, int(2 * span * per_fsr) + 1)
    vals = geo.real_condition(grid, z0, n_real)
    f = lambda e: float(geo.real_condition(e, z0, n_real))
    out = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)[0]:
        a, b = grid[i], grid[i + 1]
        fa, fb = f(a), f(b)
        if fa == 0.0:
            out.append(a)
        elif fa * fb < 0:
            out.append(brentq(f, a, b, xtol=1e-9, rtol=4 * np.finfo(float).eps, maxiter=200))
    return sorted(set(out))


def _mode_shift(geo: _Geometry, z0: float, n_real: float, branch: int = 0) -> float:
    roots = _roots(geo, z0, n_real)
    if not roots:
        raise NoRootInBracket(f"no resonance within 1.5 FSR of omega0 at z0={z0!r}")
    roots = np.asarray(roots)
    dist = np.abs(roots)
    order = np.argsort(dist)
    if len(order) > 1 and abs(dist[order[0]] - dist[order[1]]) < 1e-9 * geo.fsr:
        raise DegenerateCrossing(
            f"two resonances equidistant from omega0 at z0={z0!r}: {roots[order[:2]]}")
    i0 = order[0]
    i = i0 + branch
    if not 0 <= i < len(roots):
        raise NoRootInBracket(f"branch {branch} outside the search window")
    return float(roots[i])


def _index(membrane: MembraneParams, n_real=None):
    return membrane.n_real if n_real is None else n_real


def resonance_shift(cavity, membrane, wavelength, z0, branch=0, n_real=None) -> float:
    """Lossless resonance offset omega(z0) - omega0 in rad/s."""
    geo = _Geometry(cavity, membrane, wavelength)
    return _mode_shift(geo, z0, _index(membrane, n_real), branch)


def _richardson_d1(f, x, h):
    d = lambda s: (f(x + s) - f(x - s)) / (2.0 * s)
    return (4.0 * d(h / 2) - d(h)) / 3.0


def _richardson_d2(f, x, h, f0=None):
    f0 = f(x) if f0 is None else f0
    d = lambda s: (f(x + s) - 2.0 * f0 + f(x - s)) / (s * s)
    return (4.0 * d(h / 2) - d(h)) / 3.0


def cavity_mode(cavity: CavityParams, membrane: MembraneParams, wavelength: float,
                z0: float | None = None, branch: int = 0, step: float | None = None) -> OpticalResponse:
    """Frequency, absorption rate and their z0-derivatives of the mode nearest omega0.

    ``z0`` defaults to the position implied by ``membrane`` (absolute, or
    relative to the central node when ``node_offset`` is set). Derivatives
    use central differences with step ``lambda/2000`` and one Richardson
    refinement.
    """
    geo = _Geometry(cavity, membrane, wavelength)
    if z0 is None:
        z0 = membrane_position(cavity, membrane, wavelength)
    if abs(z0) >= 0.5 * (cavity.length - membrane.thickness):
        raise ValueError("membrane outside the cavity")
    h = wavelength / 2000.0 if step is None else step
    n_r = membrane.n_real

    shift = lambda z: _mode_shift(geo, z, n_r, branch)
    s0 = shift(z0)
    d1 = _richardson_d1(shift, z0, h)
    d2 = _richardson_d2(shift, z0, h, s0)

    if membrane.n_imag > 0:
        k1 = lambda z: _kappa1(geo, z, membrane, branch)
        kappa1 = k1(z0)
        dk1 = _richardson_d1(k1, z0, h)
    else:
        kappa1, dk1 = 0.0, 0.0
    return OpticalResponse(z0=z0, omega=geo.omega0 + s0, shift=s0, d_omega_dz=d1,
                           d2_omega_dz2=d2, kappa1=kappa1, d_kappa1_dz=dk1)


def _kappa1(geo: _Geometry, z0: float, membrane: MembraneParams, branch: int) -> float:
    # first order in n_I: Im delta omega = n_I * d omega / d n_R
    dn = 1e-4 * membrane.n_real
    f = lambda n: _mode_shift(geo, z0, n, branch)
    dwdn = _richardson_d1(f, membrane.n_real, dn)
    return abs(membrane.n_imag * dwdn)


def implicit_d_omega_dz(cavity, membrane, wavelength, z0, branch=0) -> float:
    """d omega/d z0 from the implicit-function theorem on the resonance condition."""
    geo = _Geometry(cavity, membrane, wavelength)
    n_r = membrane.n_real
    e = _mode_shift(geo, z0, n_r, branch)
    hz, he = 1e-12, 1e3
    gz = (geo.real_condition(e, z0 + hz, n_r) - geo.real_condition(e, z0 - hz, n_r)) / (2 * hz)
    ge = (geo.real_condition(e + he, z0, n_r) - geo.real_condition(e - he, z0, n_r)) / (2 * he)
    return float(-gz / ge)


def complex_resonance(cavity: CavityParams, membrane: MembraneParams, wavelength: float,
                      z0: float, branch: int = 0, lossy_mirrors: bool = False) -> complex:
    """Complex resonance offset from omega0 of the absorbing structure.

    Starts from the lossless root and polishes with a complex secant
    iteration on the full characteristic function. ``-Im`` of the result is
    the amplitude decay rate (mirror loss included when ``lossy_mirrors``).
    """
    geo = _Geometry(cavity, membrane, wavelength)
    e0 = _mode_shift(geo, z0, membrane.n_real, branch)
    n = membrane.n_real + 1j * membrane.n_imag
    r_mirror = -cavity.mirror_reflectivity if lossy_mirrors else -1.0
    f = lambda e: geo.characteristic(e, z0, n, r_mirror)[0]
    root = newton(f, complex(e0) - 1j * 1e-3, x1=complex(e0) + 1e2 - 1j * 1e2,
                  tol=1e-6, maxiter=200)
    return complex(root)


def find_node(cavity: CavityParams, membrane: MembraneParams, wavelength: float,
              branch: int = 0) -> float:
    """Field node nearest the cavity centre.

    Only cos(2 k z0) enters the resonance condition, so nodes and antinodes
    sit at multiples of lambda/4; the node is the one with the higher
    frequency (least dielectric loading).
    """
    geo = _Geometry(cavity, membrane, wavelength)
    a = _mode_shift(geo, 0.0, membrane.n_real, branch)
    b = _mode_shift(geo, wavelength / 4.0, membrane.n_real, branch)
    return 0.0 if a >= b else wavelength / 4.0


def membrane_position(cavity: CavityParams, membrane: MembraneParams, wavelength: float) -> float:
    if membrane.node_offset is None:
        return membrane.z_center
    return find_node(cavity, membrane, wavelength) + membrane.node_offset


def mode_sweep(cavity, membrane, wavelength, z_grid, branch=0):
    return [cavity_mode(cavity, membrane, wavelength, float(z), branch) for z in z_grid]


def index_for_reflectance(reflectance: float, thickness: float, wavelength: float) -> float:
    """Real index giving a measured slab power reflectance (lowest branch above 1)."""
    k = 2.0 * math.pi / wavelength

    def f(n):
        r, _ = slab_rt(n, thickness, k)
        return abs(r) ** 2 - reflectance

    n_hi = 1.0 + 1e-9
    while f(n_hi) < 0:
        n_hi += 0.01
        if n_hi > 10:
            raise ValueError("reflectance not reachable with n <= 10")
    return brentq(f, 1.0 + 1e-12, n_hi)
