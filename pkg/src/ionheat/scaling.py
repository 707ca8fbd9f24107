"""Trap-size and trap-frequency scaling of heating rates.

All rates are 1/s, sizes m, frequencies rad/s. CSV inputs use ms^-1, um and
MHz and are converted on load.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import (IonSpecies, bundled_path, get_species, mhz_to_rad_s, per_ms_to_per_s,
                   um_to_m)
from .errors import DegeneracyError, DomainError, ParseError, SchemaError
from .regression import weighted_line_fit


def extrapolate_rate(rate: float, omega_from: float, omega_to: float, exponent: float = -1.0) -> float:
    """Move a heating rate to another secular frequency assuming ndot ~ omega^exponent."""
    if not (omega_from > 0 and omega_to > 0):
        raise DomainError("frequencies must be positive")
    return rate * (omega_to / omega_from) ** exponent


@dataclass(frozen=True)
class ScalingPair:
    rate_small: float
    rate_large: float
    d_small: float
    d_large: float
    sigma_small: float = 0.0
    sigma_large: float = 0.0
    sigma_d_small: float = 0.0
    sigma_d_large: float = 0.0
    common_secular: float | None = None
    extrapolation_exponent: float | None = None
    label: str = ""

    def __post_init__(self):
        if not (self.rate_small > 0 and self.rate_large > 0):
            raise DomainError("heating rates must be positive")
        if not (self.d_small > 0 and self.d_large > self.d_small):
            raise DomainError("sizes must satisfy 0 < d_small < d_large")
        for name in ("sigma_small", "sigma_large", "sigma_d_small", "sigma_d_large"):
            if not getattr(self, name) >= 0:
                raise DomainError(f"{name} must be non-negative")


@dataclass(frozen=True)
class Exponent:
    value: float
    sigma: float


def size_exponent(pair: ScalingPair) -> Exponent:
    """alpha in ndot ~ d^-alpha from two traps at a common secular frequency."""
    ratio = pair.rate_small / pair.rate_large
    if not ratio > 0:
        raise DomainError("rate ratio must be positive")
    L = math.log(pair.d_large / pair.d_small)
    alpha = math.log(ratio) / L
    var = ((pair.sigma_small / pair.rate_small) ** 2 + (pair.sigma_large / pair.rate_large) ** 2) / L**2
    # d alpha / d d_large = -alpha / (d_large L), d alpha / d d_small = +alpha / (d_small L)
    var += (alpha * pair.sigma_d_large / (pair.d_large * L)) ** 2
    var += (alpha * pair.sigma_d_small / (pair.d_small * L)) ** 2
    return Exponent(alpha, math.sqrt(var))


MODEL_EXPONENTS = {"johnson": 2, "patch": 4}


def model_ratio(d_small: float, d_large: float, model: str) -> float:
    """Predicted small/large heating-rate ratio for a noise model's d-scaling."""
    if not (d_small > 0 and d_large > 0):
        raise DomainError("sizes must be positive")
    try:
        p = MODEL_EXPONENTS[model]
    except KeyError:
        raise DomainError(f"model must be one of {sorted(MODEL_EXPONENTS)}, got {model!r}") from None
    return (d_large / d_small) ** p


@dataclass(frozen=True)
class FrequencyScaling:
    power: float
    sigma_power: float
    spectrum_exponent: float
    log_amplitude: float


def frequency_scaling_fit(points) -> FrequencyScaling:
    """Power law ndot ~ omega^power from (omega, ndot, sigma_ndot) triples.

    The slope of ln ndot against ln omega is fitted with weights from the
    relative rate errors; when no errors are given (or all are zero) an
    unweighted fit is used. ``spectrum_exponent`` is power + 1, the exponent
    of the field-noise spectrum implied by ndot ~ S_E(omega)/omega.
    """
    pts = [tuple(p) + (0.0,) * (3 - len(p)) for p in points]
    om = np.array([p[0] for p in pts], dtype=float)
    nd = np.array([p[1] for p in pts], dtype=float)
    sg = np.array([p[2] for p in pts], dtype=float)
    if om.size < 2:
        raise DomainError("need at least two points")
    if np.unique(om).size < 2:
        raise DegeneracyError("all frequencies are identical")
    if np.any(om <= 0) or np.any(nd <= 0):
        raise DomainError("frequencies and rates must be positive")
    sigma = None
    if np.any(sg > 0):
        if np.any(sg <= 0):
            raise DomainError("give rate errors for all points or for none")
        sigma = sg / nd
    line = weighted_line_fit(np.log(om), np.log(nd), sigma)
    return FrequencyScaling(line.slope, line.sigma_slope, line.slope + 1.0, line.intercept)


@dataclass(frozen=True)
class ExperimentRecord:
    label: str
    ion: IonSpecies
    ndot: float
    secular: float
    size_d: float

    def __post_init__(self):
        if not (self.ndot > 0 and self.secular > 0 and self.size_d > 0):
            raise DomainError(f"{self.label}: rate, frequency and size must be positive")


@dataclass(frozen=True)
class CrossComparison:
    alpha: float
    labels: tuple
    values: tuple
    spread: float


def normalized_noise(rec: ExperimentRecord, alpha: float) -> float:
    """ndot * m * omega * d^alpha: constant across experiments if ndot ~ d^-alpha / (m omega)."""
    return rec.ndot * rec.ion.mass * rec.secular * rec.size_d**alpha


def cross_experiment_compare(records, alpha: float) -> CrossComparison:
    records = list(records)
    if not records:
        raise DomainError("need at least one record")
    vals = [normalized_noise(r, alpha) for r in records]
    return CrossComparison(alpha, tuple(r.label for r in records), tuple(vals), max(vals) / min(vals))


# --- CSV loaders -------------------------------------------------------------

PAIRS_HEADER = ("label", "rate_small_per_ms", "sigma_small_per_ms", "rate_large_per_ms",
                "sigma_large_per_ms", "size_small_um", "size_large_um", "secular_MHz",
                "extrapolation_exponent")
EXPERIMENTS_HEADER = ("label", "ion", "ndot_per_ms", "secular_MHz", "size_um")


def _dict_rows(path, header):
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [h for h in header if h not in (reader.fieldnames or [])]
        if missing:
            raise SchemaError(f"header lacks columns {missing}", path, 1)
        for row in reader:
            if None in row or any(v is None for v in row.values()):
                raise ParseError("wrong number of fields", path, reader.line_num)
            yield reader.line_num, row


def _num(row, key, path, line, default=None):
    raw = (row.get(key) or "").strip()
    if raw == "":
        if default is None:
            raise SchemaError(f"missing required field {key!r}", path, line)
        return default
    try:
        return float(raw)
    except ValueError:
        raise ParseError(f"field {key!r}: cannot parse {raw!r}", path, line) from None


def load_scaling_pairs(path=None) -> list[ScalingPair]:
    path = Path(path) if path else bundled_path("trap3_size_pairs.csv")
    out = []
    for line, row in _dict_rows(path, PAIRS_HEADER):
        try:
            sec = _num(row, "secular_MHz", path, line, 0.0)
            out.append(ScalingPair(
                rate_small=per_ms_to_per_s(_num(row, "rate_small_per_ms", path, line)),
                rate_large=per_ms_to_per_s(_num(row, "rate_large_per_ms", path, line)),
                d_small=um_to_m(_num(row, "size_small_um", path, line)),
                d_large=um_to_m(_num(row, "size_large_um", path, line)),
                sigma_small=per_ms_to_per_s(_num(row, "sigma_small_per_ms", path, line, 0.0)),
                sigma_large=per_ms_to_per_s(_num(row, "sigma_large_per_ms", path, line, 0.0)),
                common_secular=mhz_to_rad_s(sec) if sec > 0 else None,
                extrapolation_exponent=_num(row, "extrapolation_exponent", path, line, math.nan),
                label=row["label"].strip(),
            ))
        except DomainError as exc:
            raise SchemaError(str(exc), path, line) from None
    return out


def load_experiments(path=None) -> list[ExperimentRecord]:
    path = Path(path) if path else bundled_path("experiments.csv")
    out = []
    for line, row in _dict_rows(path, EXPERIMENTS_HEADER):
        try:
            out.append(ExperimentRecord(
                label=row["label"].strip(),
                ion=get_species(row["ion"]),
                ndot=per_ms_to_per_s(_num(row, "ndot_per_ms", path, line)),
                secular=mhz_to_rad_s(_num(row, "secular_MHz", path, line)),
                size_d=um_to_m(_num(row, "size_um", path, line)),
            ))
        except DomainError as exc:
            raise SchemaError(str(exc), path, line) from None
    return out


def pair_from_traps(small, large, sigma_small: float = 0.0, sigma_large: float = 0.0,
                    exponent: float = -1.0) -> ScalingPair:
    """ScalingPair from two TrapRecords, moving the large trap's rate to the small
    trap's secular frequency with ndot ~ omega^exponent if they differ."""
    if small.heating_rate is None or large.heating_rate is None:
        raise DomainError("both traps need a measured heating rate")
    rate_large = large.heating_rate
    if large.secular_freq != small.secular_freq:
        f = (small.secular_freq / large.secular_freq) ** exponent
        rate_large *= f
        sigma_large *= f
    return ScalingPair(small.heating_rate, rate_large, small.size_d, large.size_d,
                       sigma_small, sigma_large, common_secular=small.secular_freq,
                       extrapolation_exponent=exponent, label=f"{small.id}/{large.id}")
