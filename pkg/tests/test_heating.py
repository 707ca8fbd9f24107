import math
import warnings

import pytest
from hypothesis import given, strategies as st

from ionheat.core import SPECIES, mhz_to_rad_s
from ionheat.errors import DomainError, ModelLimitError
from ionheat.heating import (JohnsonModel, PatchModel, PatchValidityWarning,
                             heating_rate_from_spectrum, johnson_field_spectrum, johnson_rate,
                             patch_field_spectrum, patch_rate, required_spectrum_from_rate,
                             transition_rate_ground)

import oracles as o

BE = SPECIES["Be9"]
W10 = mhz_to_rad_s(10)

# frozen oracle values (see tests/oracles.py)
GROUND_RATE_1E12 = 258.8881025997039956857654
JOHNSON_1OHM_200UM = 26.80751999746340414546673
PATCH_CHAIN_1E15 = 30.33844952340281199442564


def test_oracle_values_frozen():
    w = o.omega_mhz(10)
    assert float(o.ground_rate(o.MASS_BE9, w, o.mp.mpf("1e-12"))) == pytest.approx(GROUND_RATE_1E12, rel=1e-15)
    assert float(o.johnson_rate(o.MASS_BE9, w, 1, 300, o.mp.mpf("200e-6"))) == pytest.approx(
        JOHNSON_1OHM_200UM, rel=1e-15)
    se = o.patch_field(1, o.mp.mpf("1e-6"), o.mp.mpf("1e-15"), o.mp.mpf("200e-6"))
    assert float(o.heating_rate(o.MASS_BE9, w, se)) == pytest.approx(PATCH_CHAIN_1E15, rel=1e-15)


def test_ground_rate_value():
    assert transition_rate_ground(BE, W10, 1e-12) == pytest.approx(GROUND_RATE_1E12, rel=1e-12)
    assert transition_rate_ground(BE, W10, 1e-12) == pytest.approx(259, rel=2e-3)


def test_ground_rate_zero_and_linear():
    assert transition_rate_ground(BE, W10, 0.0) == 0.0
    assert transition_rate_ground(BE, W10, 2e-12) == 2 * transition_rate_ground(BE, W10, 1e-12)


@pytest.mark.parametrize("omega", [0.0, -1.0])
def test_omega_domain(omega):
    with pytest.raises(DomainError):
        transition_rate_ground(BE, omega, 1e-12)
    with pytest.raises(DomainError):
        heating_rate_from_spectrum(BE, omega, 1e-12)


def test_negative_spectrum_rejected():
    with pytest.raises(DomainError):
        heating_rate_from_spectrum(BE, W10, -1.0)


@given(st.floats(1e-20, 1e-6), st.floats(1e5, 1e9))
def test_heating_rate_is_quarter_of_ground_rate(se, w):
    assert heating_rate_from_spectrum(BE, w, se) == pytest.approx(
        0.25 * transition_rate_ground(BE, w, se), rel=1e-14)


def test_cross_term_fraction():
    se = 1e-12
    drive = 100 * W10
    base = heating_rate_from_spectrum(BE, W10, se)
    full = heating_rate_from_spectrum(BE, W10, se, {"Omega_T": drive, "SE_sidebands": se})
    assert (full - base) / base == pytest.approx(5e-5, rel=1e-9)


def test_cross_term_domain():
    with pytest.raises(DomainError):
        heating_rate_from_spectrum(BE, W10, 1e-12, {"Omega_T": W10 / 2, "SE_sidebands": 0.0})


def test_flat_spectrum_rate_scales_inverse_omega():
    a = heating_rate_from_spectrum(BE, W10, 1e-12)
    b = heating_rate_from_spectrum(BE, 2 * W10, 1e-12)
    assert a / b == pytest.approx(2.0, rel=1e-15)


def test_required_spectrum_inverts_rate():
    se = required_spectrum_from_rate(BE, W10, 1e3)
    assert heating_rate_from_spectrum(BE, W10, se) == pytest.approx(1e3, rel=1e-14)


def test_johnson_value():
    m = JohnsonModel(1.0, 300.0, 200e-6)
    assert johnson_rate(BE, W10, m) == pytest.approx(JOHNSON_1OHM_200UM, rel=1e-12)


def test_johnson_consistent_with_field_spectrum():
    m = JohnsonModel(0.37, 77.0, 150e-6)
    via_spectrum = heating_rate_from_spectrum(BE, W10, johnson_field_spectrum(m))
    assert johnson_rate(BE, W10, m) == pytest.approx(via_spectrum, rel=1e-14)


def test_johnson_resistance_bracket():
    # resistances 2.7e-3 and 2.7e-2 ohm at d = 170 um give about 0.1 and 1 quanta/s
    lo = johnson_rate(BE, W10, JohnsonModel(2.7e-3, 300.0, 170e-6))
    hi = johnson_rate(BE, W10, JohnsonModel(2.7e-2, 300.0, 170e-6))
    assert lo == pytest.approx(0.1, rel=0.01)
    assert hi == pytest.approx(1.0, rel=0.01)


def test_johnson_halving_distance_quadruples():
    a = johnson_rate(BE, W10, JohnsonModel(1.0, 300.0, 200e-6))
    b = johnson_rate(BE, W10, JohnsonModel(1.0, 300.0, 100e-6))
    assert b / a == pytest.approx(4.0, rel=1e-14)


def test_johnson_invariants():
    with pytest.raises(DomainError):
        JohnsonModel(-1.0, 300.0, 1e-4)
    with pytest.raises(DomainError):
        JohnsonModel(1.0, 0.0, 1e-4)
    with pytest.raises(DomainError):
        JohnsonModel(1.0, 300.0, 0.0)


def test_patch_zero_voltage_noise():
    assert patch_field_spectrum(PatchModel(1.0, 1e-6, 0.0, 2e-4)) == 0.0


def test_patch_doubling_distance():
    a = patch_field_spectrum(PatchModel(1.0, 1e-6, 1e-15, 2e-4))
    b = patch_field_spectrum(PatchModel(1.0, 1e-6, 1e-15, 4e-4))
    assert a / b == pytest.approx(16.0, rel=1e-14)


def test_patch_chain_value():
    m = PatchModel(1.0, 1e-6, 1e-15, 200e-6)
    chained = heating_rate_from_spectrum(BE, W10, patch_field_spectrum(m))
    assert chained == pytest.approx(PATCH_CHAIN_1E15, rel=1e-12)
    assert chained == pytest.approx(30.3, rel=2e-3)


@given(st.floats(0.01, 1.0), st.floats(1e-8, 1e-5), st.floats(1e-20, 1e-10),
       st.floats(1.1e-4, 1e-3), st.floats(1e6, 1e8))
def test_patch_rate_equals_chain(cov, rp, sv, d, w):
    m = PatchModel(cov, rp, sv, d)
    assert patch_rate(BE, w, m) == pytest.approx(
        heating_rate_from_spectrum(BE, w, patch_field_spectrum(m)), rel=1e-15, abs=0)


def test_patch_size_ratio():
    a = patch_rate(BE, W10, PatchModel(1.0, 1e-6, 1e-15, 175e-6))
    b = patch_rate(BE, W10, PatchModel(1.0, 1e-6, 1e-15, 395e-6))
    assert a / b == pytest.approx((395 / 175) ** 4, rel=1e-13)
    assert a / b == pytest.approx(25.96, abs=5e-3)


def test_patch_coverage_to_zero():
    rates = [patch_rate(BE, W10, PatchModel(c, 1e-6, 1e-15, 2e-4)) for c in (1e-3, 1e-6, 1e-9)]
    assert rates[2] < rates[1] < rates[0]
    assert rates[2] < 1e-7


def test_patch_validity():
    with pytest.raises(ModelLimitError):
        patch_field_spectrum(PatchModel(1.0, 2e-4, 1e-15, 2e-4))
    with pytest.warns(PatchValidityWarning):
        patch_rate(BE, W10, PatchModel(1.0, 5e-5, 1e-15, 2e-4))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        patch_rate(BE, W10, PatchModel(1.0, 1e-6, 1e-15, 2e-4))


def test_patch_invariants():
    for args in ((0.0, 1e-6, 1e-15, 1e-4), (1.5, 1e-6, 1e-15, 1e-4), (1.0, 0.0, 1e-15, 1e-4),
                 (1.0, 1e-6, -1.0, 1e-4), (1.0, 1e-6, 1e-15, 0.0)):
        with pytest.raises(DomainError):
            PatchModel(*args)


def test_mass_dependence():
    hg = SPECIES["Hg198"]
    ratio = heating_rate_from_spectrum(BE, W10, 1e-12) / heating_rate_from_spectrum(hg, W10, 1e-12)
    assert ratio == pytest.approx(hg.mass / BE.mass, rel=1e-15)
    assert math.isfinite(ratio)
