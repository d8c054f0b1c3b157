import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mimcool.params import TWO_PI
from mimcool.peakfit import (NoPeakFound, fit_lorentzian, fit_temperatures,
                             floor_subtracted_area, lorentzian, point_seed, synth_spectrum)
from mimcool.spectra import detect, s_q, uniform_window
from mimcool.thermometry import analytic_report


@settings(max_examples=30, deadline=None)
@given(center=st.floats(-5, 5), fwhm=st.floats(0.5, 5), height=st.floats(1e-3, 1e3),
       floor_frac=st.floats(1e-4, 0.2))
def test_noiseless_lorentzian_recovered(center, fwhm, height, floor_frac):
    w = np.linspace(-30, 30, 801)
    y = lorentzian(w, center, fwhm, height, floor_frac * height)
    fit = fit_lorentzian(w, y)
    assert fit.center == pytest.approx(center, abs=1e-6 * fwhm)
    assert fit.fwhm == pytest.approx(fwhm, rel=1e-6)
    assert fit.height == pytest.approx(height, rel=1e-6)
    assert fit.floor == pytest.approx(floor_frac * height, rel=1e-5, abs=1e-8 * height)
    assert fit.area == pytest.approx(math.pi * height * fwhm / 2, rel=1e-6)


def test_synthetic_noise_statistics():
    truth = np.full(200_000, 3.0)
    noisy = synth_spectrum(np.arange(truth.size, dtype=float), truth, 50, 11)
    ratio = noisy.values / truth
    assert ratio.mean() == pytest.approx(1.0, abs=4 * math.sqrt(1 / 50 / truth.size))
    assert ratio.var() == pytest.approx(1 / 50, rel=0.02)
    assert np.all(noisy.values > 0)


def test_seeds_are_deterministic_and_independent():
    truth = np.ones(100)
    a = synth_spectrum(truth, truth, 10, point_seed(0, 3)).values
    b = synth_spectrum(truth, truth, 10, point_seed(0, 3)).values
    c = synth_spectrum(truth, truth, 10, point_seed(0, 4)).values
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_fit_uncertainties_are_calibrated():
    w = np.linspace(-20, 20, 401)
    truth = lorentzian(w, 0.3, 2.0, 10.0, 0.5)
    pulls = []
    for i in range(120):
        noisy = synth_spectrum(w, truth, 200, point_seed(99, i))
        fit = fit_lorentzian(w, noisy.values, snapshots=200)
        pulls.append([(fit.center - 0.3) / fit.sigma("center"),
                      (fit.fwhm - 2.0) / fit.sigma("fwhm"),
                      (fit.area - math.pi * 10.0) / fit.sigma("area")])
    pulls = np.array(pulls)
    assert np.all(np.abs(pulls.mean(axis=0)) < 0.35)
    assert np.all(np.abs(pulls.std(axis=0) - 1.0) < 0.2)


def test_flat_spectrum_has_no_peak():
    w = np.linspace(0, 1, 400)
    noisy = synth_spectrum(w, np.ones_like(w), 200, 5)
    with pytest.raises(NoPeakFound):
        fit_lorentzian(w, noisy.values, snapshots=200)
    with pytest.raises(NoPeakFound):
        fit_lorentzian(w[:5], noisy.values[:5])


def test_window_restricts_bins():
    w = np.linspace(-50, 50, 2001)
    y = lorentzian(w, 0.0, 1.0, 1.0, 0.01) + lorentzian(w, 30.0, 1.0, 5.0, 0.0)
    fit = fit_lorentzian(w, y, window=(-10, 10))
    assert fit.center == pytest.approx(0.0, abs=1e-2)


def test_fitted_temperatures_match_analytic(small):
    params, _, op = small
    mech, bath = params.mech, params.bath
    w = uniform_window(op, mech, half_widths=10, bins_per_width=20)
    tr = detect(s_q(w, op, mech, bath), op, params)
    fit = fit_lorentzian(w, tr.s_x_det)
    temps = fit_temperatures(fit, mech, bath, mech.x_zpf)
    ref = analytic_report(op, mech, bath)
    assert temps.t_gamma == pytest.approx(ref.t_gamma, rel=2e-3)
    assert temps.t_area == pytest.approx(ref.t_area, rel=5e-3)
    assert temps.t_peak == pytest.approx(ref.t_peak, rel=5e-3)


def test_pair_z_uses_quoted_sigmas(small):
    params, _, op = small
    mech, bath = params.mech, params.bath
    w = uniform_window(op, mech)
    tr = detect(s_q(w, op, mech, bath), op, params)
    noisy = synth_spectrum(w, tr.s_x_det, 200, point_seed(0, 0))
    temps = fit_temperatures(fit_lorentzian(w, noisy.values, snapshots=200), mech, bath,
                             mech.x_zpf)
    z = temps.max_pair_z()
    expected = max(abs(a - b) / math.hypot(sa, sb) for (a, sa), (b, sb) in
                   [((temps.t_area, temps.sigma_area), (temps.t_gamma, temps.sigma_gamma)),
                    ((temps.t_area, temps.sigma_area), (temps.t_peak, temps.sigma_peak)),
                    ((temps.t_gamma, temps.sigma_gamma), (temps.t_peak, temps.sigma_peak))])
    assert z == pytest.approx(expected, rel=1e-12)
    assert temps.max_pair_z(correlated=True) >= 0.0


def test_floor_subtracted_area():
    w = np.linspace(-1000, 1000, 200_001)
    y = lorentzian(w, 0, 2.0, 3.0, 0.1)
    assert floor_subtracted_area(w, y, 0.1) == pytest.approx(math.pi * 3.0, rel=2e-3)


def test_detected_units_in_hz():
    # spectra per unit w/2pi: a fit in Hz and in rad/s give the same height
    w = np.linspace(-5, 5, 201) * TWO_PI
    y = lorentzian(w, 0.0, TWO_PI, 2.0, 0.1)
    a = fit_lorentzian(w, y)
    b = fit_lorentzian(w / TWO_PI, y)
    assert a.height == pytest.approx(b.height, rel=1e-9)
    assert a.fwhm / TWO_PI == pytest.approx(b.fwhm, rel=1e-9)
