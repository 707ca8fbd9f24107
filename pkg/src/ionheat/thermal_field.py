"""Thermal electric-field noise above a conducting half-space.

The conductor fills z <= 0 and the ion sits at height z in vacuum. The field
spectral density follows from the imaginary part of the reflected dipole
Green function through the fluctuation-dissipation relation

    S_Ei = (2 k_B T / omega) * sum_j Im G_ij(r, r, omega),

with G normalised in SI so that the free-space part has Im G = k^3 / (6 pi eps0).
Two evaluations are offered: full adaptive quadrature over the transverse
wavevector (:func:`green_numeric`) and the closed-form quasi-static
interpolation (:func:`green_quasistatic`). They are *not* identical: the
closed form drops the s-polarised contribution that doubles the radial
noise for z >> skin depth and is a few percent off the p-polarised integral
around z ~ skin depth.
"""

from __future__ import annotations

import cmath
import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .core import CONST, IonSpecies
from .errors import DomainError, ModelLimitError, QuadratureError
from .heating import heating_rate_from_spectrum

# quasi-static validity: k*z and k*delta below QUIET pass silently, up to MAX warn, beyond raise
QS_QUIET_LIMIT = 1e-2
QS_MAX_LIMIT = 1e-1
# evanescent integrals stop where exp(-2 kappa z) drops below this
EVANESCENT_CUTOFF = 1e-12


class QuasiStaticWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ConductorHalfSpace:
    conductivity_sigma: float
    temperature: float

    def __post_init__(self):
        if not self.conductivity_sigma >= 0:
            raise DomainError(f"conductivity must be non-negative, got {self.conductivity_sigma}")
        if not self.temperature > 0:
            raise DomainError(f"temperature must be positive, got {self.temperature}")


@dataclass(frozen=True)
class FieldPoint:
    height_z: float
    omega: float

    def __post_init__(self):
        if not self.height_z > 0:
            raise DomainError(f"height must be positive, got {self.height_z}")
        if not self.omega > 0:
            raise DomainError(f"omega must be positive, got {self.omega}")

    @property
    def k(self) -> float:
        return self.omega / CONST.c


@dataclass(frozen=True)
class GreenFieldResult:
    S_Ez: float
    S_Erho: float
    method: str
    est_error: float = 0.0


def skin_depth(cond: ConductorHalfSpace, omega: float) -> float:
    if not omega > 0:
        raise DomainError(f"omega must be positive, got {omega}")
    if cond.conductivity_sigma == 0.0:
        return math.inf
    return math.sqrt(2.0 * CONST.c**2 * CONST.eps0 / (omega * cond.conductivity_sigma))


def dielectric_function(cond: ConductorHalfSpace, omega: float, relative: bool = False) -> complex:
    """Low-frequency permittivity eps0 + i sigma/omega (F/m), or its ratio to eps0."""
    if not omega > 0:
        raise DomainError(f"omega must be positive, got {omega}")
    eps_r = complex(1.0, cond.conductivity_sigma / (CONST.eps0 * omega))
    return eps_r if relative else CONST.eps0 * eps_r


def blackbody_spectrum(temperature: float, omega: float) -> float:
    """Free-space thermal field noise per Cartesian direction, k_B T omega^2 / (3 pi eps0 c^3)."""
    return CONST.k_B * temperature * omega**2 / (3.0 * math.pi * CONST.eps0 * CONST.c**3)


def free_space_im_green(omega: float) -> float:
    k = omega / CONST.c
    return k**3 / (6.0 * math.pi * CONST.eps0)


def fdt_spectrum(temperature: float, omega: float, im_green: float) -> float:
    return 2.0 * CONST.k_B * temperature / omega * im_green


def branch_sqrt(z: complex) -> complex:
    """Square root on the branch with non-negative imaginary part."""
    r = cmath.sqrt(z)
    if r.imag < 0 or (r.imag == 0 and r.real < 0):
        r = -r
    return r


def normal_wavevectors(cond: ConductorHalfSpace, omega: float, q: float) -> tuple[complex, complex]:
    """(w0, w): z-components of the wavevector in vacuum and in the conductor for
    transverse wavevector ``q``, both with Im >= 0."""
    k = omega / CONST.c
    eta = cond.conductivity_sigma / (CONST.eps0 * omega)
    w0 = branch_sqrt(complex(k * k - q * q, 0.0))
    # k^2 eps_r - q^2 written to avoid cancelling k^2 against q^2 in the real part
    w = branch_sqrt(complex((k - q) * (k + q), k * k * eta))
    return w0, w


def _reflection(w0: complex, w: complex, eps_r: complex):
    # r_p = (w0 eps - w)/(w0 eps + w), r_s' = (w - w0)/(w + w0), both written as
    # 1 - (small) so their imaginary parts keep full relative precision
    rp = 1.0 - 2.0 * w / (w0 * eps_r + w)
    rs = 1.0 - 2.0 * w0 / (w + w0)
    return rp, rs


def _quad(f, a, b, rtol, points=None):
    kwargs = dict(epsabs=0.0, epsrel=rtol, limit=400, full_output=1)
    if points:
        kwargs["points"] = points
    out = integrate.quad(f, a, b, **kwargs)
    value, abserr = out[0], out[1]
    if len(out) > 3 and out[3] and "roundoff" not in str(out[3]).lower():
        achieved = abserr / abs(value) if value else float("inf")
        raise QuadratureError(f"quadrature did not converge on [{a:g}, {b:g}]: {out[3]}",
                              achieved_rtol=achieved)
    return value, abserr


def _im_green_reflected(cond: ConductorHalfSpace, pt: FieldPoint, rtol: float,
                        cutoff: float = EVANESCENT_CUTOFF):
    """Reflected-field Im G_zz and Im G_rhorho (SI) with absolute error estimates."""
    k = pt.k
    z = pt.height_z
    eps_r = dielectric_function(cond, pt.omega, relative=True)
    eta = eps_r.imag
    if eta == 0.0:
        # vacuum below the interface: nothing is reflected
        return [(0.0, 0.0), (0.0, 0.0)]
    pref = 1.0 / (4.0 * math.pi * CONST.eps0)

    # propagating part, q = k sin(theta), w0 = k cos(theta) real
    def prop(theta):
        c, s = math.cos(theta), math.sin(theta)
        w0 = complex(k * c, 0.0)
        w = branch_sqrt(complex(k * k * c * c, k * k * eta))
        rp, rs = _reflection(w0, w, eps_r)
        phase = cmath.exp(2j * k * z * c)
        gzz = (rp * phase).real * k**3 * s**3
        grr = -0.5 * k**3 * s * ((c * c * rp + rs) * phase).real
        return gzz, grr

    # evanescent part in u = 2 kappa z with kappa = sqrt(q^2 - k^2), w0 = i kappa
    def evan(u):
        kappa = u / (2.0 * z)
        q2 = k * k + kappa * kappa
        w0 = complex(0.0, kappa)
        w = branch_sqrt(complex(-kappa * kappa, k * k * eta))
        rp, rs = _reflection(w0, w, eps_r)
        e = math.exp(-u) / (2.0 * z)
        gzz = q2 * rp.imag * e
        grr = 0.5 * (kappa * kappa * rp.imag - k * k * rs.imag) * e
        return gzz, grr

    u_max = -math.log(cutoff)
    delta = skin_depth(cond, pt.omega)
    brk = [2.0 * z / delta] if 0 < 2.0 * z / delta < u_max else None

    results = []
    for idx in (0, 1):
        vp, ep = _quad(lambda t: prop(t)[idx], 0.0, math.pi / 2, rtol)
        ve, ee = _quad(lambda u: evan(u)[idx], 0.0, u_max, rtol, brk)
        # truncated tail: the integrand decays like u^n e^-u with n <= 2
        f_end = abs(evan(u_max)[idx])
        tail = f_end * u_max / (u_max - 3.0)
        results.append((pref * (vp + ve), pref * (ep + ee + tail)))
    return results


def green_numeric(cond: ConductorHalfSpace, pt: FieldPoint, rtol: float = 1e-11) -> GreenFieldResult:
    """Field noise from adaptive quadrature of the half-space Green function.

    The transverse-wavevector integral is split at the vacuum wavenumber k:
    the propagating piece is mapped to an angle (removing the 1/w0 endpoint
    singularity) and the evanescent piece to u = 2 z sqrt(q^2 - k^2), cut off
    where exp(-u) < 1e-12. ``est_error`` is the larger relative error estimate
    of the two components, including the truncation bound.
    """
    if not 1e-13 <= rtol < 1:
        raise DomainError(f"rtol must lie in [1e-13, 1), got {rtol}")
    kz = pt.k * pt.height_z
    if kz >= 1.0:
        raise ModelLimitError(f"k*z = {kz:.3g} >= 1 at z = {pt.height_z:g} m; "
                              "outside the near-field model limit")
    (gzz, ezz), (grr, err) = _im_green_reflected(cond, pt, rtol)
    gfree = free_space_im_green(pt.omega)
    szz = fdt_spectrum(cond.temperature, pt.omega, gfree + gzz)
    srr = fdt_spectrum(cond.temperature, pt.omega, gfree + grr)
    scale = 2.0 * CONST.k_B * cond.temperature / pt.omega
    rel = max(scale * ezz / abs(szz), scale * err / abs(srr))
    return GreenFieldResult(szz, srr, "numeric", rel)


def check_quasistatic(cond: ConductorHalfSpace, pt: FieldPoint,
                      quiet: float = QS_QUIET_LIMIT, limit: float = QS_MAX_LIMIT) -> None:
    k = pt.k
    kz = k * pt.height_z
    kd = k * skin_depth(cond, pt.omega)
    for label, val in (("k*z", kz), ("k*delta", kd)):
        if val >= limit:
            raise ModelLimitError(f"{label} = {val:.3g} at z = {pt.height_z:g} m exceeds {limit:g}; "
                                  "quasi-static closed form not applicable")
        if val >= quiet:
            warnings.warn(f"{label} = {val:.3g} at z = {pt.height_z:g} m is not << 1",
                          QuasiStaticWarning, stacklevel=3)


def green_quasistatic(cond: ConductorHalfSpace, pt: FieldPoint, check: bool = True) -> GreenFieldResult:
    if check:
        check_quasistatic(cond, pt)
    z = pt.height_z
    delta = skin_depth(cond, pt.omega)
    kT = CONST.k_B * cond.temperature
    radical = math.sqrt(0.5 + math.sqrt(0.25 + (z / delta) ** 4))
    near = kT / (4.0 * math.pi * cond.conductivity_sigma * z**3) * radical
    s_z = 2.0 * blackbody_spectrum(cond.temperature, pt.omega) + near
    s_rho = 0.5 * near
    return GreenFieldResult(s_z, s_rho, "quasistatic", 0.0)


@dataclass(frozen=True)
class CurvePoint:
    z: float
    S_Ez: float
    S_Erho: float
    ndot_axial: float
    ndot_radial: float


def heating_vs_distance(ion: IonSpecies, cond: ConductorHalfSpace, omega_m: float,
                        z_grid) -> list[CurvePoint]:
    """Heating rate vs ion height from the quasi-static closed form, both directions."""
    pts = [FieldPoint(float(z), omega_m) for z in z_grid]
    for p in pts:
        check_quasistatic(cond, p)
    out = []
    for p in pts:
        g = green_quasistatic(cond, p, check=False)
        out.append(CurvePoint(p.height_z, g.S_Ez, g.S_Erho,
                              heating_rate_from_spectrum(ion, omega_m, g.S_Ez),
                              heating_rate_from_spectrum(ion, omega_m, g.S_Erho)))
    return out


def loglog_slope(x, y):
    """Centred log-log derivative d ln y / d ln x on a grid (one-sided at the ends)."""
    return np.gradient(np.log(np.asarray(y, float)), np.log(np.asarray(x, float)))


def locate_knee(curve: list[CurvePoint], component: str = "radial", target_slope: float = -2.5) -> float:
    """Height at which the log-log slope of the rate crosses ``target_slope``.

    For the radial component the slope runs from -3 (near field) to -2, so
    the default is the midpoint of that transition. Linear interpolation in
    ln z between the bracketing grid points.
    """
    z = np.array([p.z for p in curve])
    y = np.array([p.ndot_radial if component == "radial" else p.ndot_axial for p in curve])
    s = loglog_slope(z, y)
    for i in range(len(s) - 1):
        if (s[i] - target_slope) * (s[i + 1] - target_slope) <= 0 and s[i] != s[i + 1]:
            f = (target_slope - s[i]) / (s[i + 1] - s[i])
            return float(math.exp(math.log(z[i]) + f * (math.log(z[i + 1]) - math.log(z[i]))))
    raise ValueError("slope never crosses the target on this grid")


CURVE_HEADER = ("z_m", "S_Ez", "S_Erho", "ndot_axial", "ndot_radial")


def write_curve_csv(curve: list[CurvePoint], path, numeric: list[GreenFieldResult] | None = None) -> None:
    header = list(CURVE_HEADER)
    if numeric is not None:
        header += ["S_Ez_numeric", "S_Erho_numeric", "rel_diff_z", "rel_diff_rho"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i, p in enumerate(curve):
            row = [repr(p.z), repr(p.S_Ez), repr(p.S_Erho), repr(p.ndot_axial), repr(p.ndot_radial)]
            if numeric is not None:
                g = numeric[i]
                row += [repr(g.S_Ez), repr(g.S_Erho),
                        repr((g.S_Ez - p.S_Ez) / p.S_Ez), repr((g.S_Erho - p.S_Erho) / p.S_Erho)]
            w.writerow(row)


def read_curve_csv(path) -> list[CurvePoint]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [CurvePoint(*(float(r[h]) for h in CURVE_HEADER)) for r in rows]
