"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class PfodeError(Exception):
    """Base class for every error raised by pfode_lab."""

    exit_code = 3


class ConfigError(PfodeError, ValueError):
    """Invalid configuration, input file or user-supplied parameter."""

    exit_code = 1


class DomainError(PfodeError, ValueError):
    """Argument outside the mathematical domain of an operation."""

    exit_code = 3


class SingularityError(DomainError):
    """Noise level below the floor where a derivative or velocity is requested."""


class ConvergenceError(PfodeError, ArithmeticError):
    """A numerical procedure failed to converge or produced non-finite values."""

    exit_code = 3


class TransportSizeError(PfodeError, ValueError):
    """Exact assignment requested above the configured size cap."""

    exit_code = 1


class VerificationFailed(PfodeError):
    """At least one verification check failed."""

    exit_code = 2
