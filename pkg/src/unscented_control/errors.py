"""Exception types raised across the package."""


class UtcError(Exception):
    """Base class for all controller/library errors."""


class NotSymmetric(UtcError):
    pass


class NotPSD(UtcError):
    pass


class NotSchur(UtcError):
    """Closed-loop matrix is not strictly Schur stable."""


class Singular(UtcError):
    pass


class NonPositiveStep(UtcError):
    pass


class GimbalLock(UtcError):
    """Pitch angle too close to +/- pi/2 for the Euler-rate map."""


class ConfigError(UtcError):
    pass


class SimulationError(UtcError):
    """Wraps a runtime failure with the step index where it happened."""

    def __init__(self, step: int, cause: Exception):
        super().__init__(f"step {step}: {type(cause).__name__}: {cause}")
        self.step = step
        self.cause = cause
