"""Time-domain Langevin oracle.

Linearised mode propagates the 4-d fluctuation vector (dq, dp, dX, dY)
exactly over each step: x -> e^{A dt} x + noise, with the discrete noise
covariance from Van Loan's block exponential. Nothing is approximated, so
the step may be coarse; then the sampled signal is the exact process sampled
at 1/dt, and its spectrum is the analytic one folded into the sampling band.
``bandpass_dt`` picks a rate that folds a chosen band cleanly to fs/4.

Nonlinear mode integrates the full classical equations (position dependent
cavity frequency and absorption, intracavity field in the laser frame) with
a first-order exponential integrator. It needs a fine step.

Noise is classical: thermal force 2 gamma_m n on dp, plus the absorption
channel when Gamma != 0. Optical vacuum noise is off unless requested.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.linalg import expm, solve_continuous_lyapunov
from scipy.signal import welch

from .params import MechanicalParams, SystemParams
from .response import diffusion_matrix, drift_matrix, full_stability
from .slab import LocalOptics
from .spectra import SpectrumTrace
from .steady import OperatingPoint


class OracleError(RuntimeError):
    pass


class Diverged(OracleError):
    pass


class ResolutionError(OracleError):
    pass


@dataclass
class Trajectory:
    dt: float                    # integration step, s
    samples: np.ndarray          # (n_recorded, 4): dq, dp, dX, dY
    seed: int
    mode: str
    record_every: int = 1
    n_steps: int = 0
    second_moment: np.ndarray = field(default_factory=lambda: np.zeros((4, 4)))

    @property
    def sample_dt(self) -> float:
        return self.dt * self.record_every

    @property
    def q(self) -> np.ndarray:
        return self.samples[:, 0]

    def variance(self) -> np.ndarray:
        """Time-averaged second moments over every integration step."""
        return self.second_moment / max(self.n_steps, 1)


# ---------------------------------------------------------------------------
# exact linear propagation

def stationary_covariance(op: OperatingPoint, mech: MechanicalParams, n_thermal: float,
                          optical_noise: bool = False) -> np.ndarray:
    """Steady covariance solving A C + C A^T + D = 0."""
    A = drift_matrix(op, mech)
    D = diffusion_matrix(op, mech, n_thermal, optical_noise=optical_noise)
    return solve_continuous_lyapunov(A, -D)


def discretize(A: np.ndarray, D: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """(Phi, Q): one-step propagator and exact noise covariance.

    Van Loan's block exponential at a substep h with |A| h < 0.5, then
    repeated doubling Q(2h) = Phi(h) Q(h) Phi(h)^T + Q(h), which stays
    accurate when dt is many decay times long.
    """
    n = A.shape[0]
    norm = float(np.linalg.norm(A, 1)) * dt
    k = max(int(math.ceil(math.log2(norm / 0.5))), 0) if norm > 0.5 else 0
    h = dt / 2 ** k
    M = np.zeros((2 * n, 2 * n))
    M[:n, :n] = -A
    M[:n, n:] = D
    M[n:, n:] = A.T
    E = expm(M * h)
    phi = E[n:, n:].T
    Q = phi @ E[:n, n:]
    for _ in range(k):
        Q = phi @ Q @ phi.T + Q
        phi = phi @ phi
    return phi, 0.5 * (Q + Q.T)


def _psd_sqrt(Q: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(Q)
    vals = np.clip(vals, 0.0, None)
    return vecs * np.sqrt(vals)


@numba.njit(cache=True)
def _propagate(phi, L, x, xi, out, every, offset, moment, limit):
    n = xi.shape[0]
    rec = 0
    y = np.empty(4)
    for k in range(n):
        for i in range(4):
            s = 0.0
            for j in range(4):
                s += phi[i, j] * x[j] + L[i, j] * xi[k, j]
            y[i] = s
        for i in range(4):
            x[i] = y[i]
            if not abs(x[i]) < limit:
                return -1 - k
        for i in range(4):
            for j in range(4):
                moment[i, j] += x[i] * x[j]
        if (offset + k + 1) % every == 0:
            for i in range(4):
                out[rec, i] = x[i]
            rec += 1
    return rec


def _check_dt(dt, op, mech, check_resolution):
    fastest = max(mech.omega_m, op.kappa_T, abs(op.delta))
    if check_resolution and not dt < 0.05 / fastest:
        raise ResolutionError(f"dt = {dt:.3g} s violates dt < 0.05/{fastest:.3g}; "
                              "pass check_resolution=False for exact coarse sampling")


def trajectory_rng(seed: int, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(index)]))


def integrate(op: OperatingPoint, mech: MechanicalParams, n_thermal: float, duration: float,
              dt: float, seed: int = 0, index: int = 0, x0=None, noise: bool = True,
              optical_noise: bool = False, record_every: int = 1, record: bool = True,
              check_resolution: bool = True, allow_unstable: bool = False,
              chunk: int = 1 << 20) -> Trajectory:
    """Exact-discretisation run of the linearised fluctuation equations.

    ``x0=None`` starts from a draw of the stationary covariance, so there is
    no transient. ``record=False`` keeps only the running second moments.
    """
    _check_dt(dt, op, mech, check_resolution)
    if not allow_unstable and not full_stability(op, mech):
        raise Diverged("operating point is unstable; pass allow_unstable=True to integrate anyway")
    A = drift_matrix(op, mech)
    D = diffusion_matrix(op, mech, n_thermal, optical_noise=optical_noise)
    phi, Q = discretize(A, D if noise else 0.0 * D, dt)
    L = _psd_sqrt(Q)
    rng = trajectory_rng(seed, index)
    if x0 is None:
        if allow_unstable and not full_stability(op, mech):
            x = np.zeros(4)
        else:
            C = stationary_covariance(op, mech, n_thermal, optical_noise)
            x = _psd_sqrt(0.5 * (C + C.T)) @ rng.standard_normal(4) if noise else np.zeros(4)
    else:
        x = np.array(x0, dtype=float)
    n_steps = int(round(duration / dt))
    n_rec = n_steps // record_every if record else 0
    out = np.empty((n_rec, 4))
    moment = np.zeros((4, 4))
    scale = math.sqrt(max(n_thermal, 1.0)) * 1e6 + float(np.max(np.abs(x))) * 1e6
    done = 0
    rec_total = 0
    while done < n_steps:
        m = min(chunk, n_steps - done)
        xi = rng.standard_normal((m, 4)) if noise else np.zeros((m, 4))
        buf = np.empty((m // record_every + 1, 4)) if record else np.empty((0, 4))
        every = record_every if record else n_steps + 1
        r = _propagate(phi, L, x, xi, buf, every, done, moment, scale)
        if r < 0:
            raise Diverged(f"state left the bounded region at step {done - r - 1}")
        if record:
            take = min(r, n_rec - rec_total)
            out[rec_total:rec_total + take] = buf[:take]
            rec_total += take
        done += m
    return Trajectory(dt=dt, samples=out[:rec_total], seed=seed, mode="linearized",
                      record_every=record_every, n_steps=n_steps, second_moment=moment)


# ---------------------------------------------------------------------------
# nonlinear classical dynamics

@numba.njit(cache=True)
def _nonlinear_steps(state, xi, dt, om, a1, a2, k02, k10, k11, laser_offset, e_amp,
                     phim, psim, lm, lin, qs, as_r, as_i, limit, out, every, offset, moment):
    n = xi.shape[0]
    rec = 0
    q, p, ar, ai = state[0], state[1], state[2], state[3]
    amp = math.sqrt(as_r * as_r + as_i * as_i)
    ph_r, ph_i = as_r / amp, as_i / amp
    r2 = math.sqrt(2.0)
    for k in range(n):
        if lin:
            # first-order expansion about (qs, a_s), same stepping as below
            dq = q - qs
            dar, dai = ar - as_r, ai - as_i
            proj = dar * ph_r + dai * ph_i          # Re(da e^{-i phi})
            dwq = a1 + a2 * qs
            force = -dwq * (amp * amp + 2.0 * amp * proj) - a2 * amp * amp * dq
            det = laser_offset + a1 * qs + 0.5 * a2 * qs * qs
            kt = k02 + k10 + k11 * qs
            # drive = E - (k11 + i dwq) a_s dq
            drive_r = e_amp - (k11 * as_r - dwq * as_i) * dq
            drive_i = -(k11 * as_i + dwq * as_r) * dq
        else:
            dwq = a1 + a2 * q
            force = -dwq * (ar * ar + ai * ai)
            det = laser_offset + a1 * q + 0.5 * a2 * q * q
            kt = k02 + k10 + k11 * q
            drive_r = e_amp
            drive_i = 0.0
        lam_r = -kt
        lam_i = -det
        # mechanics about qs: exact damped rotation plus constant force (F - Om qs)
        f = force - om * qs
        u = q - qs
        nu = phim[0, 0] * u + phim[0, 1] * p + psim[0, 1] * f + lm[0, 0] * xi[k, 0] + lm[0, 1] * xi[k, 1]
        npp = phim[1, 0] * u + phim[1, 1] * p + psim[1, 1] * f + lm[1, 0] * xi[k, 0] + lm[1, 1] * xi[k, 1]
        # field: a' = lam a + drive, exact for lam and drive frozen over the step
        er = math.exp(lam_r * dt)
        cr = er * math.cos(lam_i * dt)
        ci = er * math.sin(lam_i * dt)
        mag = lam_r * lam_r + lam_i * lam_i
        fr = ((cr - 1.0) * lam_r + ci * lam_i) / mag     # Re[(e^{lam dt} - 1)/lam]
        fi = (ci * lam_r - (cr - 1.0) * lam_i) / mag     # Im[...]
        nar = cr * ar - ci * ai + fr * drive_r - fi * drive_i
        nai = ci * ar + cr * ai + fr * drive_i + fi * drive_r
        q = nu + qs
        p = npp
        ar = nar
        ai = nai
        if not (abs(nu) < limit and abs(p) < limit):
            return -1 - k
        dar, dai = ar - as_r, ai - as_i
        v0 = nu
        v1 = p
        v2 = r2 * (dar * ph_r + dai * ph_i)
        v3 = r2 * (dai * ph_r - dar * ph_i)
        vv = (v0, v1, v2, v3)
        for i in range(4):
            for j in range(4):
                moment[i, j] += vv[i] * vv[j]
        if (offset + k + 1) % every == 0:
            for i in range(4):
                out[rec, i] = vv[i]
            rec += 1
    state[0], state[1], state[2], state[3] = q, p, ar, ai
    return rec


def _mech_blocks(mech: MechanicalParams, n_thermal: float, dt: float, noise: bool):
    om, gm = mech.omega_m, mech.gamma_m
    Am = np.array([[0.0, om], [-om, -gm]])
    Dm = np.array([[0.0, 0.0], [0.0, 2.0 * gm * n_thermal if noise else 0.0]])
    phim, Qm = discretize(Am, Dm, dt)
    # psi = int_0^dt e^{A s} ds via augmented exponential
    aug = np.zeros((4, 4))
    aug[:2, :2] = Am
    aug[:2, 2:] = np.eye(2)
    psim = expm(aug * dt)[:2, 2:]
    return phim, psim, _psd_sqrt(Qm)


def integrate_nonlinear(params: SystemParams, optics: LocalOptics, op: OperatingPoint,
                        duration: float, dt: float, seed: int = 0, index: int = 0,
                        noise: bool = True, linearize: bool = False, x0=None,
                        record_every: int = 1, record: bool = True,
                        check_resolution: bool = True, chunk: int = 1 << 20) -> Trajectory:
    """Classical nonlinear equations (or their linearisation with identical stepping).

    Output is expressed as fluctuations about ``op`` in the same quadrature
    frame as the linear model: X + iY = sqrt(2) (a - a_s) e^{-i arg a_s}.
    Only the thermal force is stochastic.
    """
    mech = params.mech
    _check_dt(dt, op, mech, check_resolution)
    n_th = params.n_thermal
    phim, psim, lm = _mech_blocks(mech, n_th, dt, noise)
    k02 = params.cavity.kappa0 + params.cavity.kappa2
    e_amp = params.drive_amplitude
    a_s = e_amp / complex(op.kappa_T, op.delta)
    ph = a_s / abs(a_s)
    if x0 is None:
        state = np.array([op.q_s, 0.0, a_s.real, a_s.imag])
        if noise:
            rng0 = trajectory_rng(seed, 10_000 + index)
            state[0] += math.sqrt(n_th) * rng0.standard_normal()
            state[1] += math.sqrt(n_th) * rng0.standard_normal()
    else:
        dq, dp, dx, dy = x0
        da = complex(dx, dy) / math.sqrt(2.0) * ph
        state = np.array([op.q_s + dq, dp, (a_s + da).real, (a_s + da).imag])
    rng = trajectory_rng(seed, index)
    n_steps = int(round(duration / dt))
    n_rec = n_steps // record_every if record else 0
    out = np.empty((n_rec, 4))
    moment = np.zeros((4, 4))
    limit = 1e6 * math.sqrt(max(n_th, 1.0)) + 1e6 * abs(op.q_s)
    done = rec_total = 0
    while done < n_steps:
        m = min(chunk, n_steps - done)
        xi = rng.standard_normal((m, 2)) if noise else np.zeros((m, 2))
        buf = np.empty((m // record_every + 1, 4)) if record else np.empty((0, 4))
        every = record_every if record else n_steps + 1
        r = _nonlinear_steps(state, xi, dt, mech.omega_m, optics.a1, optics.a2, k02, optics.k0,
                             optics.k1, op.laser_offset, e_amp, phim, psim, lm, linearize,
                             op.q_s, a_s.real, a_s.imag, limit, buf, every, done, moment)
        if r < 0:
            raise Diverged(f"nonlinear trajectory diverged at step {done - r - 1}")
        if record:
            take = min(r, n_rec - rec_total)
            out[rec_total:rec_total + take] = buf[:take]
            rec_total += take
        done += m
    return Trajectory(dt=dt, samples=out[:rec_total], seed=seed,
                      mode="linearized-etd" if linearize else "nonlinear",
                      record_every=record_every, n_steps=n_steps, second_moment=moment)


# ---------------------------------------------------------------------------
# spectra from trajectories

def bandpass_dt(center: float, half_band: float) -> float:
    """Sampling step that folds [center - half_band, center + half_band] (rad/s)
    onto a band around +fs/4, clear of its mirror image at -fs/4."""
    f_c = center / (2 * math.pi)
    b = half_band / (2 * math.pi)
    m = max(int(math.floor(f_c / (4.0 * b) - 0.25)), 0)
    return (m + 0.25) / f_c


def welch_psd(traj: Trajectory, segment_length: int, overlap: int | None = None,
              component: int = 0, center: float | None = None) -> SpectrumTrace:
    """Two-sided Welch density in the library convention (int S dw/2pi = variance).

    The baseband axis covers [-fs/2, fs/2); with ``center`` (rad/s) it is
    shifted by the multiple of fs nearest to it, labelling folded bins with
    their physical frequency.
    """
    x = traj.samples[:, component]
    fs = 1.0 / traj.sample_dt
    if segment_length > len(x):
        raise ValueError("segment_length exceeds the number of samples")
    f, p = welch(x, fs=fs, window="hann", nperseg=segment_length, noverlap=overlap,
                 detrend=False, return_onesided=False, scaling="density")
    order = np.argsort(f)
    f, p = f[order], p[order]
    if center is not None:
        f = f + round(center / (2 * math.pi) / fs) * fs
    return SpectrumTrace(omega_grid=2 * math.pi * f, s_q=p)


def aggregate(traces: list[SpectrumTrace]) -> SpectrumTrace:
    """Mean PSD of equally sized Welch estimates (order independent)."""
    s = np.mean([t.s_q for t in traces], axis=0)
    return SpectrumTrace(omega_grid=traces[0].omega_grid, s_q=s)


def oracle_psd(op: OperatingPoint, mech: MechanicalParams, n_thermal: float, n_traj: int,
               duration: float, dt: float, segment_length: int, seed: int = 0,
               center: float | None = None, **kw) -> SpectrumTrace:
    traces = []
    for i in range(n_traj):
        tr = integrate(op, mech, n_thermal, duration, dt, seed=seed, index=i,
                       check_resolution=False, **kw)
        traces.append(welch_psd(tr, segment_length, center=center))
    return aggregate(traces)


def oracle_variance(op: OperatingPoint, mech: MechanicalParams, n_thermal: float, n_traj: int,
                    n_steps: int, dt: float, seed: int = 0, **kw) -> tuple[float, float]:
    """Pooled time-averaged <dq^2> and its standard error across trajectories."""
    per = []
    for i in range(n_traj):
        tr = integrate(op, mech, n_thermal, n_steps * dt, dt, seed=seed, index=i, record=False,
                       check_resolution=False, **kw)
        per.append(tr.variance()[0, 0])
    per = np.array(per)
    return float(per.mean()), float(per.std(ddof=1) / math.sqrt(len(per))) if len(per) > 1 else float("nan")


def aliased_reference(omega, spectrum_fn, fs_rad: float, images: int = 50):
    """Analytic PSD folded at sampling rate fs_rad (rad/s): sum_k S(w + k fs)."""
    w = np.asarray(omega, dtype=float)
    total = np.zeros_like(w)
    for k in range(-images, images + 1):
        total += spectrum_fn(w + k * fs_rad)
    return total
