"""Exception hierarchy.

Each class carries the process exit code the CLI uses when it escapes a
subcommand, so callers embedding the library can map failures the same way.
"""


class IonHeatError(Exception):
    exit_code = 1


class DomainError(IonHeatError, ValueError):
    """A physical input lies outside the domain of a formula (e.g. omega <= 0)."""

    exit_code = 7


class ConfigError(IonHeatError):
    exit_code = 2


class ParseError(IonHeatError):
    """Malformed input file; ``line`` is 1-based when known."""

    exit_code = 3

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class SchemaError(ParseError):
    """File parses but a row violates a field requirement or invariant."""


class ModelLimitError(IonHeatError):
    """Inputs outside the validity window of a physical approximation."""

    exit_code = 4


class FitError(IonHeatError):
    exit_code = 5

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NoSignalError(FitError):
    pass


class DegeneracyError(FitError):
    pass


class QuadratureError(FitError):
    """Adaptive quadrature failed to reach the requested tolerance."""

    def __init__(self, message, achieved_rtol=None):
        super().__init__(message, {"achieved_rtol": achieved_rtol})
        self.achieved_rtol = achieved_rtol


class EstimatorDomainError(IonHeatError):
    """Sideband ratio outside the range where the n-bar estimator is defined."""

    exit_code = 6
