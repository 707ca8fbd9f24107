"""Trapped-ion motional heating: noise models, sideband thermometry and scaling analysis."""

__version__ = "0.1.0"

from .core import CONST, SPECIES, IonSpecies, NoiseSpectrum, TrapRecord, get_species
from .errors import (ConfigError, DegeneracyError, DomainError, EstimatorDomainError, FitError,
                     IonHeatError, ModelLimitError, NoSignalError, ParseError, QuadratureError,
                     SchemaError)

__all__ = [
    "CONST", "SPECIES", "IonSpecies", "NoiseSpectrum", "TrapRecord", "get_species",
    "ConfigError", "DegeneracyError", "DomainError", "EstimatorDomainError", "FitError",
    "IonHeatError", "ModelLimitError", "NoSignalError", "ParseError", "QuadratureError",
    "SchemaError",
]
