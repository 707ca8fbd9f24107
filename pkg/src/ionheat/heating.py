"""Closed-form heating-rate predictions.

Rates are in quanta per second; spectral densities are one-sided (V/m)^2/Hz
except where :func:`transition_rate_ground` is concerned (see ``core``).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

from .core import CONST, IonSpecies
from .errors import DomainError, ModelLimitError


class PatchValidityWarning(UserWarning):
    """Patch radius not small compared to the ion-electrode distance."""


@dataclass(frozen=True)
class JohnsonModel:
    resistance: float
    temperature: float
    distance_d: float

    def __post_init__(self):
        if not self.resistance >= 0:
            raise DomainError(f"resistance must be non-negative, got {self.resistance}")
        if not self.temperature > 0:
            raise DomainError(f"temperature must be positive, got {self.temperature}")
        if not self.distance_d > 0:
            raise DomainError(f"distance must be positive, got {self.distance_d}")


@dataclass(frozen=True)
class PatchModel:
    coverage_C: float
    patch_radius_rp: float
    patch_voltage_psd_SV: float
    distance_d: float

    def __post_init__(self):
        if not 0 < self.coverage_C <= 1:
            raise DomainError(f"coverage must lie in (0, 1], got {self.coverage_C}")
        if not self.patch_radius_rp > 0:
            raise DomainError("patch radius must be positive")
        if not self.patch_voltage_psd_SV >= 0:
            raise DomainError("patch voltage PSD must be non-negative")
        if not self.distance_d > 0:
            raise DomainError("distance must be positive")


def _check_omega(omega_m):
    if not omega_m > 0:
        raise DomainError(f"secular frequency must be positive, got {omega_m}")


def transition_rate_ground(ion: IonSpecies, omega_m: float, SE: float) -> float:
    """|0> -> |1> rate q^2 S_E / (m hbar omega_m).

    This expression carries the bare prefactor, so it is 4x the heating rate
    of :func:`heating_rate_from_spectrum` for the same number ``SE``.
    """
    _check_omega(omega_m)
    if not SE >= 0:
        raise DomainError(f"spectral density must be non-negative, got {SE}")
    return ion.charge**2 * SE / (ion.mass * CONST.hbar * omega_m)


def heating_rate_from_spectrum(ion: IonSpecies, omega_m: float, SE_secular: float,
                               cross_term: dict | None = None) -> float:
    """Heating rate from the one-sided field noise at the secular frequency.

    ``cross_term`` (optional) is ``{"Omega_T": rad/s, "SE_sidebands": S_E(Omega_T +- omega_m)}``
    and adds the rf/noise cross-coupling contribution, weighted by
    omega_m^2 / (2 Omega_T^2).
    """
    _check_omega(omega_m)
    if not SE_secular >= 0:
        raise DomainError(f"spectral density must be non-negative, got {SE_secular}")
    total = SE_secular
    if cross_term is not None:
        drive = cross_term["Omega_T"]
        s_side = cross_term["SE_sidebands"]
        if not drive > omega_m:
            raise DomainError("rf drive frequency must exceed the secular frequency")
        if not s_side >= 0:
            raise DomainError("sideband spectral density must be non-negative")
        total = total + omega_m**2 / (2.0 * drive**2) * s_side
    return ion.charge**2 / (4.0 * ion.mass * CONST.hbar * omega_m) * total


def required_spectrum_from_rate(ion: IonSpecies, omega_m: float, ndot: float) -> float:
    """One-sided S_E(omega_m) implied by a measured heating rate (cross term neglected)."""
    _check_omega(omega_m)
    if not ndot >= 0:
        raise DomainError(f"heating rate must be non-negative, got {ndot}")
    return ndot * 4.0 * ion.mass * CONST.hbar * omega_m / ion.charge**2


def johnson_field_spectrum(model: JohnsonModel) -> float:
    return 4.0 * CONST.k_B * model.temperature * model.resistance / model.distance_d**2


def johnson_rate(ion: IonSpecies, omega_m: float, model: JohnsonModel) -> float:
    _check_omega(omega_m)
    return (ion.charge**2 * CONST.k_B * model.temperature * model.resistance
            / (ion.mass * CONST.hbar * omega_m * model.distance_d**2))


def _check_patch(model: PatchModel):
    if model.patch_radius_rp >= model.distance_d:
        raise ModelLimitError(
            f"patch radius {model.patch_radius_rp:g} m is not smaller than distance "
            f"{model.distance_d:g} m; the spherical-shell patch model does not apply")
    if model.patch_radius_rp >= model.distance_d / 10:
        warnings.warn(
            f"patch radius {model.patch_radius_rp:g} m is not << distance {model.distance_d:g} m",
            PatchValidityWarning, stacklevel=3)


def patch_field_spectrum(model: PatchModel) -> float:
    """Field noise at the centre of a sphere of radius d tiled with fluctuating patches."""
    _check_patch(model)
    a = model.distance_d
    return 3.0 * model.coverage_C * model.patch_voltage_psd_SV * model.patch_radius_rp**2 / (4.0 * a**4)


def patch_rate(ion: IonSpecies, omega_m: float, model: PatchModel) -> float:
    _check_omega(omega_m)
    _check_patch(model)
    return (3.0 * ion.charge**2 * model.coverage_C * model.patch_radius_rp**2
            * model.patch_voltage_psd_SV
            / (16.0 * ion.mass * CONST.hbar * omega_m * model.distance_d**4))
