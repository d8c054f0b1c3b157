import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mimcool.params import C_LIGHT, MembraneParams, nominal_params
from mimcool.slab import (MembraneMatrix, cavity_mode, complex_resonance, find_node,
                          implicit_d_omega_dz, index_for_reflectance, membrane_position,
                          membrane_rt, mode_sweep, slab_rt)

LAM = 1064e-9
K = 2 * math.pi / LAM


def airy_reflectance(n, thickness, k):
    """Power reflectance of a lossless slab from the Airy sum."""
    r01 = (1 - n) / (1 + n)
    f = 4 * r01 ** 2 / (1 - r01 ** 2) ** 2
    s = math.sin(n * k * thickness) ** 2
    return f * s / (1 + f * s)


def thin_membrane_shift(z, r, length):
    """Mode shift from the node for a thin membrane of amplitude reflectivity r."""
    c = C_LIGHT / length
    return -c * (math.acos(r * math.cos(2 * K * z)) - math.acos(r))


@pytest.fixture(scope="module")
def geom():
    p = nominal_params()
    return p.cavity, p.membrane


def test_nominal_reflectance_matches_airy_sum():
    m = membrane_rt(MembraneParams(n_imag=0.0), K)
    assert m.reflectance == pytest.approx(airy_reflectance(2.0, 50e-9, K), rel=1e-12)
    assert m.reflectance == pytest.approx(0.148492637, rel=1e-8)


@given(n=st.floats(1.01, 4.0), d=st.floats(1e-9, 500e-9))
def test_lossless_slab_conserves_energy(n, d):
    r, t = slab_rt(n, d, K)
    assert abs(r) ** 2 + abs(t) ** 2 == pytest.approx(1.0, abs=1e-12)
    assert abs(r) ** 2 == pytest.approx(airy_reflectance(n, d, K), abs=1e-12)


@given(n_imag=st.floats(1e-7, 1e-2))
def test_absorbing_slab_loses_energy(n_imag):
    m = membrane_rt(MembraneParams(n_imag=n_imag), K)
    assert m.reflectance + abs(m.t) ** 2 < 1.0


def test_transfer_matrix_is_unimodular_for_lossless_slab():
    m = membrane_rt(MembraneParams(n_imag=0.0), K)
    assert isinstance(m, MembraneMatrix)
    assert abs(np.linalg.det(m.matrix)) == pytest.approx(1.0, abs=1e-12)


def test_index_for_reflectance_roundtrip():
    n = index_for_reflectance(0.18, 50e-9, LAM)
    assert n == pytest.approx(2.0941, abs=1e-4)
    assert airy_reflectance(n, 50e-9, K) == pytest.approx(0.18, abs=1e-12)


def test_swing_and_node_curvature_match_thin_membrane_formula(geom):
    cav, mem = geom
    r = math.sqrt(membrane_rt(MembraneParams(n_imag=0.0), K).reflectance)
    node = cavity_mode(cav, mem, LAM, 0.0)
    anti = cavity_mode(cav, mem, LAM, LAM / 4)
    swing = 2 * C_LIGHT / cav.length * math.asin(r)
    assert node.shift - anti.shift == pytest.approx(swing, rel=1e-5)
    curvature = 4 * K * K * r / math.sqrt(1 - r * r) * C_LIGHT / cav.length
    assert node.d2_omega_dz2 == pytest.approx(-curvature, rel=1e-5)
    assert anti.d2_omega_dz2 == pytest.approx(curvature, rel=1e-5)


@pytest.mark.parametrize("z", [10e-9, 15e-9, 60e-9, 133e-9, 200e-9])
def test_slope_matches_thin_membrane_formula(geom, z):
    cav, mem = geom
    r = math.sqrt(membrane_rt(MembraneParams(n_imag=0.0), K).reflectance)
    h = 1e-11
    slope = (thin_membrane_shift(z + h, r, cav.length)
             - thin_membrane_shift(z - h, r, cav.length)) / (2 * h)
    assert cavity_mode(cav, mem, LAM, z).d_omega_dz == pytest.approx(slope, rel=1e-5)


def test_implicit_derivative_agrees_with_finite_differences(geom):
    cav, mem = geom
    z = 30e-9
    assert implicit_d_omega_dz(cav, mem, LAM, z) == pytest.approx(
        cavity_mode(cav, mem, LAM, z).d_omega_dz, rel=1e-6)


def test_half_wavelength_periodicity(geom):
    cav, mem = geom
    for z in (5e-9, 30e-9, 120e-9):
        a = cavity_mode(cav, mem, LAM, z)
        b = cavity_mode(cav, mem, LAM, z + LAM / 2)
        assert a.shift == pytest.approx(b.shift, abs=1e-6 * 2.5e9)
        assert a.d_omega_dz == pytest.approx(b.d_omega_dz, rel=1e-6)


def test_node_is_the_high_frequency_extremum(geom):
    cav, mem = geom
    node = find_node(cav, mem, LAM)
    assert node == 0.0
    sweep = mode_sweep(cav, mem, LAM, np.linspace(0, LAM / 2, 21))
    shifts = [s.shift for s in sweep]
    assert int(np.argmax(shifts)) in (0, 20)
    assert abs(cavity_mode(cav, mem, LAM, node).d_omega_dz) < 1e-6 * 1e16


def test_membrane_position_from_node_offset(geom):
    cav, mem = geom
    assert membrane_position(cav, mem, LAM) == pytest.approx(10e-9)


def test_absorption_rate_present_only_with_imaginary_index(geom):
    cav, mem = geom
    lossless = MembraneParams(n_imag=0.0, node_offset=10e-9)
    assert cavity_mode(cav, lossless, LAM).kappa1 == 0.0
    assert cavity_mode(cav, mem, LAM).kappa1 > 0.0


def test_absorption_rate_is_linear_in_imaginary_index(geom):
    cav, _ = geom
    a = cavity_mode(cav, MembraneParams(n_imag=2e-6), LAM, 30e-9).kappa1
    b = cavity_mode(cav, MembraneParams(n_imag=4e-6), LAM, 30e-9).kappa1
    assert b == pytest.approx(2 * a, rel=1e-10)


def test_first_order_absorption_matches_complex_root(geom):
    cav, mem = geom
    z = 30e-9
    mode = cavity_mode(cav, mem, LAM, z)
    root = complex_resonance(cav, mem, LAM, z)
    assert -root.imag == pytest.approx(mode.kappa1, rel=1e-6)
    assert root.real == pytest.approx(mode.shift, abs=1e-3)


def test_membrane_outside_cavity_rejected(geom):
    cav, mem = geom
    with pytest.raises(ValueError):
        cavity_mode(cav, mem, LAM, cav.length)
