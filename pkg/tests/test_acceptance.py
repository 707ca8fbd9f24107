"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Tolerances are the stated ones; nothing here is loosened to make a case pass.
"""

import math
import time

import numpy as np
import pytest

from ionheat.core import SPECIES, mhz_to_rad_s
from ionheat.heating import JohnsonModel, heating_rate_from_spectrum, johnson_rate
from ionheat.pipeline import ScanConfig, coverage_study, default_grid
from ionheat.scaling import (ScalingPair, cross_experiment_compare, frequency_scaling_fit,
                             load_experiments, load_scaling_pairs, model_ratio, size_exponent)
from ionheat.thermal_field import (ConductorHalfSpace, FieldPoint, green_numeric,
                                   green_quasistatic, heating_vs_distance, locate_knee,
                                   loglog_slope, skin_depth)
from ionheat.thermometry import (RabiCoupling, SidebandPair, ThermalDistribution, nbar_from_ratio,
                                 rabi_frequency, sideband_strength)

import oracles as o

BE = SPECIES["Be9"]
W10 = mhz_to_rad_s(10)
MO = ConductorHalfSpace(1.87e7, 300.0)
DELTA = skin_depth(MO, W10)
W0 = 2 * math.pi * 250e3


def test_1_ratio_identity(criterion):
    rng = np.random.default_rng(1)
    times = rng.uniform(1e-6, 1e-4, 20)
    worst = 0.0
    start = time.perf_counter()
    for nbar in (0.1, 0.5, 1.0, 2.0, 5.0):
        d = ThermalDistribution(nbar)
        for k in (1, 2, 3):
            for eta in (0.05, 0.2):
                c = RabiCoupling(W0, eta)
                for t in times:
                    red = sideband_strength(d, c, k, t, "red")
                    blue = sideband_strength(d, c, k, t, "blue")
                    worst = max(worst, abs(red / blue / d.ratio**k - 1))
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-9 and elapsed < 5.0
    criterion(1, ok, f"max rel dev {worst:.2e} (tol 1e-9), {elapsed:.2f} s (< 5 s)")
    assert ok


def test_2_estimator_inversion(criterion):
    worst = 0.0
    for nbar in np.concatenate([[0.0], np.geomspace(1e-3, 50, 40)]):
        for k in (1, 2, 3, 4):
            r = nbar / (1 + nbar)
            e = nbar_from_ratio(SidebandPair(k, 0.4 * r**k, 0.4))
            worst = max(worst, abs(e.nbar - nbar) / max(nbar, 1e-300) if nbar else e.nbar)
    zero = nbar_from_ratio(SidebandPair(1, 0.0, 0.3)).nbar
    one = nbar_from_ratio(SidebandPair(1, 0.25, 0.5)).nbar
    ok = worst <= 1e-12 and zero == 0.0 and one == 1.0
    criterion(2, ok, f"round trip max rel err {worst:.1e} (tol 1e-12); R=0 -> {zero}; R=0.5 -> {one}")
    assert ok


def test_3_closed_form_vs_quadrature(criterion):
    start = time.perf_counter()
    zr = np.geomspace(0.03, 30, 25)
    worst_z = worst_r = 0.0
    at_r = at_z = None
    for x in zr:
        pt = FieldPoint(x * DELTA, W10)
        assert pt.k * pt.height_z < 1e-3
        num, qs = green_numeric(MO, pt), green_quasistatic(MO, pt)
        dz = abs(qs.S_Ez - num.S_Ez) / num.S_Ez
        dr = abs(qs.S_Erho - num.S_Erho) / num.S_Erho
        if dz > worst_z:
            worst_z, at_z = dz, x
        if dr > worst_r:
            worst_r, at_r = dr, x
    elapsed = time.perf_counter() - start
    ok = max(worst_z, worst_r) <= 0.01 and elapsed < 120
    criterion(3, ok, f"max rel diff axial {worst_z:.3f} at z/delta={at_z:.2f}, "
                     f"radial {worst_r:.3f} at z/delta={at_r:.2f} (tol 0.01), {elapsed:.1f} s")
    assert ok


def test_4_asymptotics(criterion):
    def slope_at(x):
        z = DELTA * x * np.array([0.99, 1.0, 1.01])
        return loglog_slope(z, [green_quasistatic(MO, FieldPoint(zi, W10)).S_Erho for zi in z])[1]

    near, far = slope_at(0.01), slope_at(10.0)
    floor = float(o.axial_floor(300, o.omega_mhz(10)))
    with pytest.warns(UserWarning):
        sz = green_quasistatic(MO, FieldPoint(0.1, W10)).S_Ez
    blackbody = W10**2 * 1.380649e-23 * 300 / (3 * math.pi * 8.8541878128e-12 * 299792458.0**3)
    rel = abs(sz - floor) / floor
    ok = abs(near + 3) <= 0.05 and abs(far + 2) <= 0.05 and rel <= 0.01
    criterion(4, ok, f"radial slopes {near:.3f} (z=delta/100), {far:.3f} (z=10 delta); "
                     f"axial/floor-1 = {rel:.1e} at 10 cm; floor = {floor:.4e} "
                     f"= {floor / blackbody:.3f} x blackbody")
    assert ok


def test_5_distance_curve(criterion):
    z = np.geomspace(1e-6, 1e-3, 301)
    curve = heating_vs_distance(BE, MO, W10, z)
    knee = locate_knee(curve)
    p200 = heating_vs_distance(BE, MO, W10, [200e-6])[0]
    worst = max(p200.ndot_axial, p200.ndot_radial)
    ok = 0.8 < knee / DELTA < 1.25 and worst < 0.1
    criterion(5, ok, f"slope transition at {knee * 1e6:.1f} um = {knee / DELTA:.3f} delta "
                     f"(delta = {DELTA * 1e6:.2f} um); ndot(200 um) = {worst:.2e} /s (< 0.1)")
    assert ok


def test_6_scaling_exponents(criterion):
    pairs = {p.label: size_exponent(p) for p in load_scaling_pairs()}
    s1, s2 = pairs["trap3-set1"], pairs["trap3-set2"]
    ok = 3.2 <= s1.value <= 4.4 and 10.0 <= s2.value <= 14.0
    criterion(6, ok, f"ratio 20+-6 -> {s1.value:.2f} +- {s1.sigma:.2f} (in 3.8+-0.6); "
                     f"ratio 16000 -> {s2.value:.2f} (in 12+-2)")
    assert ok


def test_7_model_ratios(criterion):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(500):
        ds = 10 ** rng.uniform(-6, -3)
        dl = ds * 10 ** rng.uniform(0.01, 2)
        for model, power in (("johnson", 2), ("patch", 4)):
            e = size_exponent(ScalingPair(model_ratio(ds, dl, model), 1.0, ds, dl))
            worst = max(worst, abs(e.value - power) / power)
    rate = johnson_rate(BE, W10, JohnsonModel(1.0, 300.0, 200e-6))
    ref = float(o.johnson_rate(o.MASS_BE9, o.omega_mhz(10), 1, 300, o.mp.mpf("200e-6")))
    rel = abs(rate - ref) / ref
    ok = worst <= 1e-12 and rel <= 1e-6 and round(rate, 1) == 26.8
    criterion(7, ok, f"exponent of model ratio max rel dev {worst:.1e}; Johnson example "
                     f"{rate:.4f} /s vs oracle rel {rel:.1e} (tol 1e-6)")
    assert ok


def test_8_cross_experiment(criterion):
    recs = [r for r in load_experiments() if r.label in ("Be-trap1", "Hg-Diedrich89")]
    assert len(recs) == 2
    s4 = cross_experiment_compare(recs, 4.0).spread
    s2 = cross_experiment_compare(recs, 2.0).spread
    ok = s4 < 2.0 and s2 > 3.0
    criterion(8, ok, f"Hg/Be spread {s4:.2f} at alpha=4 (< 2), {s2:.2f} at alpha=2 (> 3)")
    assert ok


def test_9_closed_loop_monte_carlo(criterion):
    coupling = RabiCoupling(W0, 0.2)
    t = 0.5 * math.pi / rabi_frequency(coupling, 0, 1)
    cfg = ScanConfig(tuple(default_grid(t)), t, 500, 1, "blue", 0)
    start = time.perf_counter()
    cov = coverage_study(0.1, 12e3, [0.0, 30e-6, 60e-6, 90e-6], coupling, cfg, range(200))
    elapsed = time.perf_counter() - start
    ok = (abs(cov.relative_bias) <= 0.02 and abs(cov.coverage_1sigma - 0.68) <= 0.07
          and elapsed < 120 and cov.n_failed == 0)
    criterion(9, ok, f"200 seeds: bias {cov.relative_bias * 100:+.2f} % (|.| <= 2 %), "
                     f"1-sigma coverage {cov.coverage_1sigma:.3f} (0.68 +- 0.07), "
                     f"{cov.n_failed} failed, {elapsed:.1f} s")
    assert ok


def test_10_frequency_scaling(criterion):
    omegas = [mhz_to_rad_s(f) for f in (1, 2, 3, 5, 8, 10, 15, 20)]
    pts = [(w, heating_rate_from_spectrum(BE, w, 1e-11 * (mhz_to_rad_s(1) / w))) for w in omegas]
    fit = frequency_scaling_fit(pts)
    err = abs(fit.power + 2)
    ok = err <= 1e-10
    criterion(10, ok, f"fitted power {fit.power:.14f} (|+2| = {err:.1e}, tol 1e-10)")
    assert ok
