"""Exception types shared across the package."""


class ParameterDomainError(ValueError):
    """A parameter lies outside its mathematical domain."""


class UsageError(ValueError):
    """An operation was invoked with mutually inconsistent arguments."""


class CapacityError(RuntimeError):
    """The particle population exceeded the configured cap.

    Attributes carry enough context to diagnose the run: the time at which
    the population first crossed the cap and the replica that overflowed.
    """

    def __init__(self, message: str, *, time: float, replica: int, cap: int):
        super().__init__(message)
        self.time = time
        self.replica = replica
        self.cap = cap


class InsufficientDataError(ValueError):
    """Too few usable data points for a fit."""

    def __init__(self, message: str, offending_t=()):
        super().__init__(message)
        self.offending_t = tuple(offending_t)


class ConfigError(ValueError):
    """A campaign configuration failed to parse or validate."""
