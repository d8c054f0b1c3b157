import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from mimcool.params import (KNOWN_KEYS, NOMINAL_DEFAULTS, TWO_PI, InconsistentPair, MissingKey,
                            NonPositiveValue, ParamError, UnknownKey, build_params, dump_config,
                            load_config, nominal_params, params_equal, parse_config, serialize,
                            sql_displacement, strong_params)

# reference numbers computed by hand from CODATA constants
X_ZPF = 1.0227069797379082e-15
N_CLASSICAL = 17237248.0234097
N_BOSE = 17237247.523409702
DRIVE_AMPLITUDE = 41668238955.12559


def test_mechanical_derived_quantities():
    p = nominal_params()
    assert p.mech.gamma_m / TWO_PI == pytest.approx(14.858333333333333, rel=1e-12)
    assert p.mech.x_zpf == pytest.approx(X_ZPF, rel=1e-12)
    assert p.mech.q_factor == pytest.approx(24000.0, rel=1e-12)


def test_thermal_occupation_classical_and_bose():
    p = nominal_params()
    assert p.n_thermal == pytest.approx(N_CLASSICAL, rel=1e-12)
    exact = nominal_params(exact_bose=True)
    assert exact.n_thermal == pytest.approx(N_BOSE, rel=1e-12)
    assert p.n_thermal - exact.n_thermal == pytest.approx(0.5, abs=1e-6)


def test_drive_amplitude_uses_input_mirror_rate():
    p = nominal_params()
    assert p.cavity.kappa0 == pytest.approx(TWO_PI * 77e3 / 2, rel=1e-12)
    assert p.drive_amplitude == pytest.approx(DRIVE_AMPLITUDE, rel=1e-12)


def test_hz_and_angular_spellings_agree():
    a = nominal_params()
    raw = dict(NOMINAL_DEFAULTS)
    raw.pop("omega_m_hz")
    raw["omega_m_rad_s"] = TWO_PI * 356.6e3
    b = build_params(raw)
    assert params_equal(a, b)


def test_both_spellings_must_agree():
    with pytest.raises(InconsistentPair):
        nominal_params(omega_m_rad_s=1.0)


def test_gamma_and_q_consistency():
    ok = nominal_params(gamma_m_hz=356.6e3 / 24000)
    assert ok.mech.gamma_m == pytest.approx(TWO_PI * 14.858333, rel=1e-6)
    with pytest.raises(InconsistentPair):
        nominal_params(gamma_m_hz=20.0)


def test_unknown_and_missing_keys():
    with pytest.raises(UnknownKey):
        nominal_params(omega_hz=1.0)
    raw = dict(NOMINAL_DEFAULTS)
    del raw["mass_kg"]
    with pytest.raises(MissingKey):
        build_params(raw)
    raw = dict(NOMINAL_DEFAULTS)
    del raw["omega_m_hz"]
    with pytest.raises(MissingKey):
        build_params(raw)


@pytest.mark.parametrize("key,value", [("mass_kg", 0.0), ("q", -1.0), ("T", 0.0),
                                       ("omega_m_hz", -5.0), ("thickness_m", 0.0)])
def test_non_positive_values_rejected(key, value):
    with pytest.raises(NonPositiveValue):
        nominal_params(**{key: value})


def test_non_numeric_value_rejected():
    with pytest.raises(ParamError):
        nominal_params(power_w="lots")


def test_kappa_split_around_absorption():
    p = nominal_params(kappa1_rad_s=100.0)
    total = p.cavity.kappa0 + p.cavity.kappa2 + p.optics.kappa1
    assert total == pytest.approx(TWO_PI * 77e3, rel=1e-12)
    assert p.cavity.kappa0 == p.cavity.kappa2
    with pytest.raises(NonPositiveValue):
        nominal_params(kappa1_rad_s=1e9)


def test_linewidth_from_finesse_when_not_given():
    raw = dict(NOMINAL_DEFAULTS)
    del raw["kappa_t_hz"]
    p = build_params(raw)
    expected = math.pi * 299792458.0 / (2 * 93e-3 * 60000.0)
    assert p.cavity.kappa0 + p.cavity.kappa2 == pytest.approx(expected, rel=1e-12)


def test_sql_reference():
    p = nominal_params()
    s = sql_displacement(p)
    expected = 2 * 1.054571817e-34 * 24000 / (45e-12 * (TWO_PI * 356.6e3) ** 2)
    assert s == pytest.approx(expected, rel=1e-12)
    ratio = 2.4e-15 / math.sqrt(s)
    assert ratio == pytest.approx(16.0332, rel=1e-4)
    # the often quoted ratio of about 40 holds for a density per unit angular frequency
    assert ratio * math.sqrt(TWO_PI) == pytest.approx(40, rel=0.01)


def test_config_text_roundtrip(tmp_path):
    p = strong_params(exact_bose=True)
    path = tmp_path / "run.cfg"
    path.write_text("# comment line\n" + dump_config(p))
    q = load_config(path)
    assert params_equal(p, q)


def test_config_parser_rejects_garbage():
    with pytest.raises(ParamError):
        parse_config("this line has no separator")
    with pytest.raises(UnknownKey):
        parse_config("nonsense = 3")


def test_with_replaces_twins():
    p = nominal_params().with_(detuning_hz=100e3)
    assert p.drive.detuning == pytest.approx(TWO_PI * 100e3)
    p = p.with_(kappa_t_hz=50e3)
    assert p.cavity.kappa0 + p.cavity.kappa2 == pytest.approx(TWO_PI * 50e3)


@given(
    f=st.floats(1e3, 1e8), mass=st.floats(1e-15, 1e-6), q=st.floats(10, 1e8),
    power=st.floats(0, 1e-1), temp=st.floats(1e-3, 1e3), kappa=st.floats(1e2, 1e7),
)
def test_serialize_roundtrip_property(f, mass, q, power, temp, kappa):
    p = nominal_params(omega_m_hz=f, mass_kg=mass, q=q, power_w=power, T=temp, kappa_t_hz=kappa,
                     detuning_hz=f)
    assert params_equal(build_params(serialize(p)), p, rel=1e-12)
    assert set(serialize(p)) <= KNOWN_KEYS


@given(temp=st.floats(1.0, 1e3))
def test_classical_occupation_exceeds_bose_by_half(temp):
    p = nominal_params(T=temp)
    exact = nominal_params(T=temp, exact_bose=True)
    assert p.n_thermal - exact.n_thermal == pytest.approx(0.5, abs=1e-3)
