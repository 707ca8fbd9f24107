import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ionheat.errors import DomainError, EstimatorDomainError, NoSignalError
from ionheat.thermometry import (RabiCoupling, SidebandPair, ThermalDistribution, laguerre,
                                 laguerre_range, nbar_from_ratio, rabi_between, rabi_frequency,
                                 rabi_ladder, sideband_strength, sideband_weights, thermal_prob)

import oracles as o

W0 = 2 * math.pi * 250e3


def test_ground_state_populations():
    d = ThermalDistribution(0.0)
    assert thermal_prob(d, 0) == 1.0
    assert thermal_prob(d, 3) == 0.0
    assert d.max_level() == 0


def test_nbar_one_populations():
    d = ThermalDistribution(1.0)
    assert thermal_prob(d, 0) == pytest.approx(0.5, rel=1e-15)
    assert thermal_prob(d, 1) == pytest.approx(0.25, rel=1e-15)


@given(st.floats(1e-3, 50.0), st.sampled_from([1e-6, 1e-9, 1e-12]))
def test_truncation_rule(nbar, eps):
    d = ThermalDistribution(nbar, eps)
    M = d.max_level()
    p = d.probabilities(M + 1)
    assert p.sum() >= 1 - eps - 1e-13
    if M > 0:
        assert p[:-1].sum() < 1 - eps + 1e-13


def test_distribution_invariants():
    with pytest.raises(DomainError):
        ThermalDistribution(-0.1)
    with pytest.raises(DomainError):
        ThermalDistribution(1.0, 0.0)
    with pytest.raises(DomainError):
        thermal_prob(ThermalDistribution(1.0), -1)


@pytest.mark.parametrize("n", range(0, 31, 3))
@pytest.mark.parametrize("alpha", [0, 1, 2, 5])
@pytest.mark.parametrize("x", [0.0025, 0.04, 0.5, 3.0])
def test_laguerre_recurrence_vs_direct_sum(n, alpha, x):
    ref = float(o.laguerre_sum(n, alpha, x))
    assert laguerre(n, alpha, x) == pytest.approx(ref, rel=1e-10, abs=1e-10 * max(1.0, abs(ref)))
    assert laguerre_range(n, alpha, x)[n] == laguerre(n, alpha, x)


def test_laguerre_negative_degree():
    with pytest.raises(DomainError):
        laguerre(-1, 0, 0.1)


@pytest.mark.parametrize("n,k,eta", [(0, 1, 0.2), (5, 2, 0.1), (30, 3, 0.3), (12, 0, 0.05)])
def test_rabi_matches_oracle(n, k, eta):
    c = RabiCoupling(W0, eta)
    assert rabi_frequency(c, n, k) == pytest.approx(float(o.rabi(W0, eta, n, k)), rel=1e-12)


def test_rabi_lamb_dicke_limit():
    c = RabiCoupling(W0, 1e-4)
    for n in (0, 1, 5, 20):
        assert rabi_frequency(c, n, 1) == pytest.approx(W0 * 1e-4 * math.sqrt(n + 1), rel=1e-6)


def test_rabi_carrier_limit():
    c = RabiCoupling(W0, 1e-6)
    assert rabi_frequency(c, 3, 0) == pytest.approx(W0, rel=1e-10)


@given(st.integers(0, 60), st.integers(0, 60), st.floats(0.01, 0.9))
def test_rabi_symmetry(n1, n2, eta):
    c = RabiCoupling(W0, eta)
    assert rabi_between(c, n1, n2) == rabi_between(c, n2, n1)


def test_rabi_large_n_is_finite():
    c = RabiCoupling(W0, 0.2)
    v = rabi_frequency(c, 400, 3)
    assert math.isfinite(v)
    ladder = rabi_ladder(c, 3, 400)
    assert ladder[400] == pytest.approx(v, rel=1e-12)
    assert np.all(np.isfinite(ladder))


def test_coupling_invariants():
    with pytest.raises(DomainError):
        RabiCoupling(0.0)
    with pytest.raises(DomainError):
        RabiCoupling(W0, 0.0)
    with pytest.warns(UserWarning):
        RabiCoupling(W0, 1.5)


def test_strength_at_zero_time():
    d, c = ThermalDistribution(1.3), RabiCoupling(W0, 0.2)
    assert sideband_strength(d, c, 1, 0.0, "red") == 0.0
    assert sideband_strength(d, c, 1, 0.0, "blue") == 0.0


def test_red_sideband_of_ground_state():
    d, c = ThermalDistribution(0.0), RabiCoupling(W0, 0.2)
    for t in (1e-6, 7e-6, 3e-5):
        assert sideband_strength(d, c, 1, t, "red") == 0.0
        assert sideband_strength(d, c, 1, t, "blue") > 0.0


def test_side_validation():
    with pytest.raises(DomainError):
        sideband_weights(ThermalDistribution(1.0), RabiCoupling(W0), 1, "green")
    with pytest.raises(DomainError):
        sideband_strength(ThermalDistribution(1.0), RabiCoupling(W0), 1, -1.0, "red")


def test_ratio_independent_of_time():
    d, c = ThermalDistribution(0.5), RabiCoupling(W0, 0.1)
    rng = np.random.default_rng(11)
    for t in rng.uniform(1e-6, 2e-4, 20):
        r = sideband_strength(d, c, 1, t, "red") / sideband_strength(d, c, 1, t, "blue")
        assert r == pytest.approx(1 / 3, rel=1e-10)


@pytest.mark.parametrize("nbar,k,eta,t", [(0.5, 1, 0.1, 3.3e-5), (2.0, 2, 0.2, 1.7e-5),
                                          (1.0, 3, 0.05, 9e-5)])
def test_strength_matches_brute_force_oracle(nbar, k, eta, t):
    c = RabiCoupling(W0, eta)
    d = ThermalDistribution(nbar)
    for side in ("red", "blue"):
        ref = float(o.sideband_sum(nbar, W0, eta, k, t, side))
        assert sideband_strength(d, c, k, t, side) == pytest.approx(ref, rel=1e-10)


@settings(deadline=None, max_examples=60)
@given(st.floats(0.01, 10.0), st.integers(1, 4), st.floats(0.02, 0.4), st.floats(1e-7, 1e-3))
def test_ratio_identity_property(nbar, k, eta, t):
    d, c = ThermalDistribution(nbar), RabiCoupling(W0, eta)
    blue = sideband_strength(d, c, k, t, "blue")
    if blue < 1e-8:
        return
    red = sideband_strength(d, c, k, t, "red")
    assert red / blue == pytest.approx(d.ratio**k, rel=1e-9)


def test_estimator_trivial_cases():
    e = nbar_from_ratio(SidebandPair(1, 0.25, 0.5))
    assert e.nbar == 1.0
    e = nbar_from_ratio(SidebandPair(2, 0.125, 0.5))
    assert e.nbar == pytest.approx(1.0, rel=1e-15)
    e = nbar_from_ratio(SidebandPair(1, 0.0, 0.5, 0.01, 0.01))
    assert e.nbar == 0.0
    assert e.sigma_nbar == pytest.approx(0.01 / 0.5, rel=1e-15)


def test_estimator_sigma_at_zero_for_higher_order():
    e = nbar_from_ratio(SidebandPair(2, 0.0, 0.5, 0.01, 0.01))
    assert e.nbar == 0.0
    assert e.sigma_nbar == math.inf


@given(st.floats(0.0, 20.0), st.integers(1, 5))
def test_estimator_round_trip(nbar, k):
    r = nbar / (1 + nbar)
    blue = 0.6
    e = nbar_from_ratio(SidebandPair(k, blue * r**k, blue))
    assert e.nbar == pytest.approx(nbar, rel=1e-12, abs=1e-15)


def test_estimator_sigma_propagation():
    # finite-difference check of the first-order propagation
    ir, ib, sr, sb = 0.2, 0.5, 0.01, 0.02
    e = nbar_from_ratio(SidebandPair(2, ir, ib, sr, sb))
    h = 1e-7

    def n(a, b):
        return nbar_from_ratio(SidebandPair(2, a, b)).nbar

    dr = (n(ir + h, ib) - n(ir - h, ib)) / (2 * h)
    db = (n(ir, ib + h) - n(ir, ib - h)) / (2 * h)
    assert e.sigma_nbar == pytest.approx(math.hypot(dr * sr, db * sb), rel=1e-6)


def test_estimator_errors():
    with pytest.raises(NoSignalError):
        nbar_from_ratio(SidebandPair(1, 0.0, 0.0))
    with pytest.raises(EstimatorDomainError, match="higher sideband order"):
        nbar_from_ratio(SidebandPair(1, 0.5, 0.5))
    with pytest.raises(DomainError):
        SidebandPair(0, 0.1, 0.2)
    with pytest.raises(DomainError):
        SidebandPair(1, 1.2, 0.2)


def test_no_warnings_in_normal_use():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        sideband_strength(ThermalDistribution(3.0), RabiCoupling(W0, 0.2), 2, 1e-5, "red")
