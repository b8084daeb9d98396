"""Exception types shared across the package."""


class NetdpmError(Exception):
    """Base class for all package-specific errors."""


class DomainError(NetdpmError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class InvalidStateError(NetdpmError, ValueError):
    """A model object violates one of its structural invariants."""


class NumericalError(NetdpmError, ArithmeticError):
    """A computation produced a non-finite or otherwise unusable result."""


class IngestionError(NetdpmError, ValueError):
    """An input file or record set could not be resolved against the data."""


class ConfigError(NetdpmError, ValueError):
    """A run configuration is incomplete or inconsistent."""
