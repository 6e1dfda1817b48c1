"""Exception hierarchy shared across the package."""


class Gdr2Error(Exception):
    """Base class for all package errors."""


class DomainError(Gdr2Error, ValueError):
    """Argument outside the mathematical domain of a function."""


class BoundaryError(DomainError):
    """Point on the simplex boundary where a log-ratio quantity is undefined."""


class ParameterError(Gdr2Error, ValueError):
    """Invalid distribution or model parameters."""


class ConfigurationError(ParameterError):
    """Invalid or inconsistent user configuration."""


class DegenerateError(Gdr2Error, ValueError):
    """Requested quantity is unattainable for the given inputs."""


class DataError(Gdr2Error, ValueError):
    """Malformed or unusable dataset."""


class SamplingError(Gdr2Error, RuntimeError):
    """MCMC failed to initialize or produce usable draws."""


class NumericalError(Gdr2Error, ArithmeticError):
    """Linear algebra failed or lost too much precision."""
