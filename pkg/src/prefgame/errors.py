"""Exception hierarchy shared across the package."""


class PrefGameError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(PrefGameError, ValueError):
    """Inputs have incompatible shapes."""


class DomainError(PrefGameError, ValueError):
    """An input lies outside the domain of the operation (support, finiteness, sign)."""


class SolverError(PrefGameError, RuntimeError):
    """An iterative procedure failed to reach its stopping criterion."""


class ConfigError(PrefGameError, ValueError):
    """An experiment or solver configuration is invalid."""
