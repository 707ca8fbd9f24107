"""Physical constants, ion species, trap descriptions and parametric noise spectra.

Everything is SI internally. Frequencies called ``omega`` are angular (rad/s);
the unit helpers at the bottom convert at I/O boundaries.

Spectral-density convention: a :class:`NoiseSpectrum` is *one-sided*, i.e. the
S_E that enters the heating rate with prefactor q^2 / (4 m hbar omega). The
ground-state transition rate :func:`ionheat.heating.transition_rate_ground`
uses the bare prefactor q^2 / (m hbar omega); the two agree when the latter is
fed a spectrum four times smaller, and that factor is kept explicit rather
than folded into either formula.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable

from .errors import DomainError, ParseError, SchemaError


@dataclass(frozen=True)
class PhysicalConstants:
    q_e: float = 1.602176634e-19
    k_B: float = 1.380649e-23
    hbar: float = 1.054571817e-34
    eps0: float = 8.8541878128e-12
    c: float = 299792458.0
    amu: float = 1.66053906660e-27
    m_e: float = 9.1093837015e-31

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not value > 0:
                raise DomainError(f"physical constant {name} must be positive, got {value}")


CONST = PhysicalConstants()


@dataclass(frozen=True)
class IonSpecies:
    name: str
    mass: float
    charge: float = CONST.q_e

    def __post_init__(self):
        if not self.mass > 0:
            raise DomainError(f"ion mass must be positive, got {self.mass}")
        if not self.charge > 0:
            raise DomainError(f"ion charge must be positive, got {self.charge}")
        n = self.charge / CONST.q_e
        if abs(n - round(n)) > 1e-9:
            raise DomainError(f"ion charge must be a multiple of q_e, got {n} q_e")

    @classmethod
    def from_atomic_mass(cls, name: str, atomic_mass_u: float, charge_state: int = 1) -> "IonSpecies":
        """Ion of the given isotope with ``charge_state`` electrons removed."""
        mass = atomic_mass_u * CONST.amu - charge_state * CONST.m_e
        return cls(name, mass, charge_state * CONST.q_e)

    @property
    def mass_u(self) -> float:
        return self.mass / CONST.amu


# isotope atomic masses (u), AME2016
SPECIES = {
    "Be9": IonSpecies.from_atomic_mass("Be9", 9.012183065),
    "Hg198": IonSpecies.from_atomic_mass("Hg198", 197.96676860),
    "Ca40": IonSpecies.from_atomic_mass("Ca40", 39.962590863),
}

_SPECIES_ALIASES = {
    "9be+": "Be9", "be9+": "Be9", "be+": "Be9", "be": "Be9",
    "198hg+": "Hg198", "hg198+": "Hg198", "hg+": "Hg198", "hg": "Hg198",
    "40ca+": "Ca40", "ca40+": "Ca40", "ca+": "Ca40", "ca": "Ca40",
}


def get_species(name: str) -> IonSpecies:
    if name in SPECIES:
        return SPECIES[name]
    key = _SPECIES_ALIASES.get(name.strip().lower())
    if key is None:
        lowered = {k.lower(): k for k in SPECIES}
        key = lowered.get(name.strip().lower())
    if key is None:
        raise DomainError(f"unknown ion species {name!r}; known: {', '.join(SPECIES)}")
    return SPECIES[key]


TRAP_TYPES = ("ring", "elliptical-ring", "linear")


@dataclass(frozen=True)
class TrapRecord:
    id: str
    trap_type: str
    material: str
    size_d: float
    secular_freq: float
    drive_freq: float | None = None
    heating_rate: float | None = None
    temperature: float = 300.0

    def __post_init__(self):
        if self.trap_type not in TRAP_TYPES:
            raise DomainError(f"trap type must be one of {TRAP_TYPES}, got {self.trap_type!r}")
        if not self.size_d > 0:
            raise DomainError(f"trap {self.id}: size_d must be positive, got {self.size_d}")
        if not self.secular_freq > 0:
            raise DomainError(f"trap {self.id}: secular_freq must be positive")
        if self.drive_freq is not None and not self.drive_freq > self.secular_freq:
            raise DomainError(f"trap {self.id}: drive_freq must exceed secular_freq")
        if self.heating_rate is not None and self.heating_rate < 0:
            raise DomainError(f"trap {self.id}: heating_rate must be non-negative")
        if not self.temperature > 0:
            raise DomainError(f"trap {self.id}: temperature must be positive")


SPECTRUM_KINDS = ("flat", "power-law", "tabulated")


@dataclass(frozen=True)
class NoiseSpectrum:
    """One-sided electric-field noise spectral density S_E(omega), (V/m)^2/Hz.

    ``flat``: S_E = amplitude. ``power-law``: S_E = amplitude * (omega/ref_freq)**exponent.
    ``tabulated``: log-log interpolation of ``table`` (pairs of omega, S_E),
    with power-law extrapolation from the end segments; ``amplitude`` is a
    multiplicative scale so that all kinds are homogeneous in it.
    """

    kind: str = "flat"
    amplitude: float = 0.0
    exponent: float = 0.0
    ref_freq: float = 1.0
    table: tuple[tuple[float, float], ...] = field(default=())

    def __post_init__(self):
        if self.kind not in SPECTRUM_KINDS:
            raise DomainError(f"spectrum kind must be one of {SPECTRUM_KINDS}, got {self.kind!r}")
        if not self.amplitude >= 0:
            raise DomainError(f"spectrum amplitude must be non-negative, got {self.amplitude}")
        if self.kind == "power-law" and not self.ref_freq > 0:
            raise DomainError("power-law spectrum needs ref_freq > 0")
        if self.kind == "tabulated":
            if len(self.table) < 2:
                raise DomainError("tabulated spectrum needs at least two points")
            omegas = [w for w, _ in self.table]
            if any(w <= 0 for w in omegas) or any(b <= a for a, b in zip(omegas, omegas[1:])):
                raise DomainError("tabulated spectrum frequencies must be positive and increasing")
            if any(s <= 0 for _, s in self.table):
                raise DomainError("tabulated spectrum values must be positive for log interpolation")


def spectrum_eval(spec: NoiseSpectrum, omega: float) -> float:
    if not omega > 0:
        raise DomainError(f"omega must be positive, got {omega}")
    if spec.kind == "flat":
        return spec.amplitude
    if spec.kind == "power-law":
        return spec.amplitude * (omega / spec.ref_freq) ** spec.exponent
    # tabulated
    pts = spec.table
    lw = math.log(omega)
    if omega <= pts[0][0]:
        (w0, s0), (w1, s1) = pts[0], pts[1]
    elif omega >= pts[-1][0]:
        (w0, s0), (w1, s1) = pts[-2], pts[-1]
    else:
        i = next(i for i in range(1, len(pts)) if pts[i][0] >= omega)
        (w0, s0), (w1, s1) = pts[i - 1], pts[i]
    slope = (math.log(s1) - math.log(s0)) / (math.log(w1) - math.log(w0))
    return spec.amplitude * math.exp(math.log(s0) + slope * (lw - math.log(w0)))


# --- unit helpers ---------------------------------------------------------

TWO_PI = 2.0 * math.pi


def mhz_to_rad_s(f_mhz: float) -> float:
    return TWO_PI * f_mhz * 1e6


def rad_s_to_mhz(omega: float) -> float:
    return omega / TWO_PI / 1e6


def hz_to_rad_s(f_hz: float) -> float:
    return TWO_PI * f_hz


def rad_s_to_hz(omega: float) -> float:
    return omega / TWO_PI


def um_to_m(x: float) -> float:
    return x * 1e-6


def m_to_um(x: float) -> float:
    return x * 1e6


def per_ms_to_per_s(x: float) -> float:
    return x * 1e3


def per_s_to_per_ms(x: float) -> float:
    return x * 1e-3


# --- trap table I/O -------------------------------------------------------

TRAP_TABLE_HEADER = ("id", "type", "material", "size_um", "drive_MHz", "secular_MHz",
                     "heating_per_ms", "temperature_K")
_REQUIRED = ("id", "type", "material", "size_um", "secular_MHz")


def _data_dir() -> Path:
    import os

    env = os.environ.get("IONHEAT_DATA_DIR")
    if env:
        return Path(env)
    return Path(str(resources.files("ionheat") / "data"))


def bundled_path(name: str) -> Path:
    """Path of a data file, honouring ``IONHEAT_DATA_DIR`` when set."""
    return _data_dir() / name


def _float_field(row, key, path, line, required):
    raw = (row.get(key) or "").strip()
    if raw == "":
        if required:
            raise SchemaError(f"missing required field {key!r}", path, line)
        return None
    try:
        return float(raw)
    except ValueError:
        raise ParseError(f"field {key!r}: cannot parse {raw!r} as a number", path, line) from None


def _row_to_record(row, path, line) -> TrapRecord:
    for key in _REQUIRED:
        if (row.get(key) or "").strip() == "":
            raise SchemaError(f"missing required field {key!r}", path, line)
    size = _float_field(row, "size_um", path, line, True)
    drive = _float_field(row, "drive_MHz", path, line, False)
    secular = _float_field(row, "secular_MHz", path, line, True)
    heating = _float_field(row, "heating_per_ms", path, line, False)
    temp = _float_field(row, "temperature_K", path, line, False)
    try:
        return TrapRecord(
            id=row["id"].strip(),
            trap_type=row["type"].strip(),
            material=row["material"].strip(),
            size_d=um_to_m(size),
            secular_freq=mhz_to_rad_s(secular),
            drive_freq=None if drive is None else mhz_to_rad_s(drive),
            heating_rate=None if heating is None else per_ms_to_per_s(heating),
            temperature=300.0 if temp is None else temp,
        )
    except DomainError as exc:
        raise SchemaError(str(exc), path, line) from None


def load_trap_table(path) -> list[TrapRecord]:
    path = Path(path)
    text = path.read_text()
    if not text.strip():
        return []
    reader = csv.DictReader(text.splitlines())
    missing = [h for h in _REQUIRED if h not in (reader.fieldnames or [])]
    if missing:
        raise SchemaError(f"header lacks required columns {missing}", path, 1)
    records = []
    for row in reader:
        line = reader.line_num
        if None in row or any(v is None for v in row.values()):
            raise ParseError("wrong number of fields", path, line)
        records.append(_row_to_record(row, path, line))
    return records


def format_exact(x: float | None, to_unit=None, from_unit=None) -> str:
    """Shortest decimal, in display units, that converts back to exactly ``x``."""
    if x is None:
        return ""
    if to_unit is None:
        return repr(float(x))
    shown = to_unit(x)
    for digits in range(12, 18):
        text = f"{shown:.{digits}g}"
        if from_unit(float(text)) == x:
            return text
    # the nearest display value can be a few ulps off the exact preimage
    for direction in (math.inf, -math.inf):
        cand = shown
        for _ in range(4):
            cand = math.nextafter(cand, direction)
            if from_unit(cand) == x:
                return repr(cand)
    return repr(shown)


def write_trap_table(records: Iterable[TrapRecord], path) -> None:
    """Write records in the trap-table CSV schema (inverse of :func:`load_trap_table`)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAP_TABLE_HEADER)
        for r in records:
            w.writerow([
                r.id, r.trap_type, r.material,
                format_exact(r.size_d, m_to_um, um_to_m),
                format_exact(r.drive_freq, rad_s_to_mhz, mhz_to_rad_s),
                format_exact(r.secular_freq, rad_s_to_mhz, mhz_to_rad_s),
                format_exact(r.heating_rate, per_s_to_per_ms, per_ms_to_per_s),
                format_exact(r.temperature),
            ])


def load_bundled_traps() -> list[TrapRecord]:
    return load_trap_table(bundled_path("table1_traps.csv"))
