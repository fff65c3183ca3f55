"""Exception types shared across the simulator."""


class SimError(Exception):
    """Base class for all simulator errors."""


class InvalidGeometryError(SimError):
    """Raised when a geometric construction violates its preconditions."""


class OutOfBoundsError(SimError):
    """Raised when a location falls outside the world rectangle."""


class ConfigError(SimError):
    """Raised for invalid, unknown, or out-of-range configuration values."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"config key '{key}': {message}")


class InfeasibleScaleError(SimError):
    """Raised when an exact solver is asked for an instance beyond its guard."""


class ContractViolationError(SimError):
    """Raised when a caller violates an API contract (e.g. empty competitive set)."""
