import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mimcool.params import TWO_PI, nominal_params
from mimcool.response import (at_resonance, chi_bare, chi_eff, diffusion_matrix, drift_matrix,
                              effective_dynamics, eigenvalues, full_stability, gamma_eff,
                              omega_eff, omega_eff_shift, optical_damping, optimal_detuning,
                              routh_hurwitz, self_energy, spring_term)
from mimcool.steady import OperatingPoint

MECH = nominal_params().mech
OM = MECH.omega_m
KAPPA = TWO_PI * 77e3

couplings = st.floats(-0.05, 0.05)
detunings = st.floats(-3.0, 3.0)
linewidths = st.floats(1e-3, 3.0)


def point(g, delta, kappa, h=0.0, gamma_abs=0.0, kappa1=0.0):
    return OperatingPoint.from_couplings(g=g * OM, delta=delta * OM, kappa_T=kappa * OM,
                                         h=h * OM, gamma_abs=gamma_abs * OM, kappa1=kappa1 * OM)


@given(g=couplings, d=detunings, k=linewidths, x=st.floats(0.5, 1.5), h=st.floats(-1e-4, 1e-4))
def test_susceptibility_equals_dressed_lorentzian(g, d, k, x, h):
    op = point(g, d, k, h)
    w = x * OM
    r = effective_dynamics(w, op, MECH).scalar()
    closed = OM / (r.omega_eff_sq - w * w - 1j * w * r.gamma_eff)
    assert complex(r.chi_eff) == pytest.approx(closed, rel=1e-9)


@given(g=couplings, d=detunings, k=linewidths, x=st.floats(0.5, 1.5),
       gam=st.floats(-1e-6, 1e-6))
def test_susceptibility_from_drift_matrix(g, d, k, x, gam):
    op = point(g, d, k, 1e-5, gamma_abs=gam, kappa1=1e-4)
    w = x * OM
    A = drift_matrix(op, MECH)
    transfer = np.linalg.inv(-1j * w * np.eye(4) - A)
    assert transfer[0, 1] == pytest.approx(complex(chi_eff(w, op, MECH)), rel=1e-8)


def test_self_energy_real_and_imaginary_parts():
    op = point(-0.02, 0.8, 0.2, gamma_abs=1e-6, kappa1=1e-4)
    w = np.linspace(0.5, 1.5, 11) * OM
    sig = self_energy(w, op, MECH)
    assert np.allclose(sig.real, spring_term(w, op, MECH), rtol=1e-12, atol=0)
    assert np.allclose(sig.imag / w, optical_damping(w, op, MECH), rtol=1e-12, atol=0)


def test_bare_limits():
    op = point(0.0, 1.0, 0.2)
    w = np.linspace(0.9, 1.1, 7) * OM
    assert np.allclose(chi_eff(w, op, MECH), chi_bare(w, MECH), rtol=1e-14)
    assert gamma_eff(op, MECH) == MECH.gamma_m
    assert omega_eff(op, MECH) == pytest.approx(OM, rel=1e-15)


def test_red_detuning_cools_blue_heats():
    red = point(-0.01, 1.0, KAPPA / OM)
    blue = point(-0.01, -1.0, KAPPA / OM)
    assert gamma_eff(red, MECH) > MECH.gamma_m
    assert gamma_eff(blue, MECH) < MECH.gamma_m


def test_small_coupling_regression(small):
    params, _, op = small
    r = at_resonance(op, params.mech)
    # reference values from the closed forms with G = -0.01, h = 1e-5 (units of Omega_m)
    assert r.gamma_eff / params.mech.gamma_m == pytest.approx(6.49337, rel=1e-5)
    assert omega_eff_shift(op, params.mech) == pytest.approx(-16.48, abs=0.01)


def test_hand_evaluated_damping():
    g, d, k = -0.01 * OM, OM, KAPPA
    expected = MECH.gamma_m + g * OM * 2 * g * d * k / ((k * k) * (k * k + 4 * OM * OM))
    assert gamma_eff(OperatingPoint.from_couplings(g, d, k), MECH) == pytest.approx(expected,
                                                                                    rel=1e-12)


@given(h=st.floats(-1e-3, 1e-3))
def test_frequency_shift_on_resonance_is_quadratic_dispersion_only(h):
    op = point(-0.01, 0.0, KAPPA / OM, h)
    # rationalised form of sqrt(Om^2 + h Om^2) - Om, free of cancellation
    expected = h * OM * OM / (math.sqrt(OM * OM + h * OM * OM) + OM)
    assert omega_eff_shift(op, MECH) == pytest.approx(expected, rel=1e-12, abs=1e-300)


def test_resolved_sideband_limit():
    g = -0.01 * OM
    k = 1e-3 * OM
    op = OperatingPoint.from_couplings(g, OM, k)
    opt = gamma_eff(op, MECH) - MECH.gamma_m
    assert opt == pytest.approx(g * g / (2 * k), rel=1e-5)


@given(g=st.floats(-0.3, 0.3), d=st.floats(-3.0, 3.0), k=st.floats(1e-2, 3.0))
def test_routh_hurwitz_agrees_with_eigenvalues(g, d, k):
    op = point(g, d, k, 1e-5)
    eig = eigenvalues(op, MECH)
    margin = np.min(np.abs(eig.real)) / OM
    if margin < 1e-9:
        return
    assert routh_hurwitz(op, MECH) == full_stability(op, MECH)


def test_strong_blue_drive_is_unstable():
    op = point(-0.05, -1.0, 0.1)
    assert not full_stability(op, MECH)
    assert effective_dynamics(OM, op, MECH).indicator.anti_damped


def test_negative_radicand_flagged():
    op = point(0.0, 0.0, 0.2, h=-2.0)
    r = effective_dynamics(OM, op, MECH)
    assert r.indicator.negative_radicand
    assert np.isnan(r.omega_eff)


def test_diffusion_matrix_structure():
    op = point(-0.01, 1.0, 0.2, gamma_abs=1e-6, kappa1=1e-4)
    n = 1.7e7
    D = diffusion_matrix(op, MECH, n)
    assert D[1, 1] == pytest.approx(2 * MECH.gamma_m * n + (1e-6 * OM) ** 2 / (4e-4 * OM))
    assert D[2, 2] == D[3, 3] == pytest.approx(0.2 * OM)
    assert D[1, 3] == D[3, 1] == pytest.approx(0.5e-6 * OM)
    assert np.all(np.linalg.eigvalsh(D) >= -1e-9 * D[1, 1])
    with pytest.raises(ZeroDivisionError):
        diffusion_matrix(point(-0.01, 1.0, 0.2, gamma_abs=1e-6), MECH, n)


def test_optimal_detuning_fixed_power(small):
    params, _, op = small
    best = optimal_detuning(op, params.mech)
    assert 0.95 <= best / OM <= 1.10
    fixed_g = optimal_detuning(op, params.mech, fixed_power=False)
    # at fixed coupling the optimum sits at or above the sideband
    assert fixed_g > best
