"""Compare Welch spectra of simulated trajectories with the analytic S_q.

Prints the worst pointwise ratio over Omega_eff +- 5 gamma_eff for the three
reference operating points, plus the variance-reduction check.
"""
import argparse
import time

import numpy as np

from mimcool.oracle import aliased_reference, bandpass_dt, oracle_psd, oracle_variance
from mimcool.params import TWO_PI, nominal_params, strong_params
from mimcool.response import effective_dynamics, gamma_eff
from mimcool.spectra import s_q
from mimcool.steady import OperatingPoint, prepare, solve_at
from mimcool.thermometry import cooling_factor

POINTS = [(0.0, 1.0), (-0.01, 1.0), (-0.01, 0.5)]


def spectrum_check(n_traj, segments, seed):
    p = nominal_params()
    mech, om = p.mech, p.mech.omega_m
    for g, d in POINTS:
        op = OperatingPoint.from_couplings(g * om, d * om, TWO_PI * 77e3, h=1e-5 * om)
        r = effective_dynamics(om, op, mech).scalar()
        dt = bandpass_dt(r.omega_eff, 40 * r.gamma_eff)
        t0 = time.perf_counter()
        est = oracle_psd(op, mech, p.n_thermal, n_traj, segments * 4096 * dt, dt, 4096,
                         seed=seed, center=r.omega_eff)
        ref = aliased_reference(est.omega_grid,
                                lambda w: s_q(w, op, mech, p.bath, flat_thermal=True).s_q,
                                TWO_PI / dt)
        win = np.abs(est.omega_grid - r.omega_eff) <= 5 * r.gamma_eff
        ratio = est.s_q[win] / ref[win]
        print(f"g={g:+.3f} delta={d:.2f}: mean {ratio.mean():.4f}, "
              f"max dev {np.max(np.abs(ratio - 1)):.3f}, {time.perf_counter() - t0:.1f} s")


def variance_check(n_traj, steps, seed):
    params, optics = prepare(strong_params())
    op = solve_at(params, optics)
    mech = params.mech
    t0 = time.perf_counter()
    var, sem = oracle_variance(op, mech, params.n_thermal, n_traj, steps,
                               0.25 / gamma_eff(op, mech), seed=seed)
    print(f"cooling factor {cooling_factor(op, mech):.3f}, oracle {params.n_thermal / var:.3f} "
          f"+- {params.n_thermal * sem / var ** 2:.3f}, {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trajectories", type=int, default=20)
    ap.add_argument("--segments", type=int, default=100)
    ap.add_argument("--steps", type=int, default=10_000_000)
    ap.add_argument("--seed", type=int, default=7)
    a = ap.parse_args()
    spectrum_check(a.trajectories, a.segments, a.seed)
    variance_check(8, a.steps, a.seed)
