"""Shared exception and warning types for the simulator."""


class OpaSimError(Exception):
    """Base class for operational failures raised by this package."""


class ConfigError(OpaSimError):
    """Invalid, inconsistent or incomplete run configuration."""


class DivergenceError(OpaSimError):
    """A numerical computation left its domain of validity.

    Carries the simulation time at which the blow-up was detected when
    that is meaningful.
    """

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time


class ResourceLimitError(OpaSimError):
    """A requested computation exceeds the configured resource caps."""


class TruncationWarning(UserWarning):
    """Fock-space truncation is materially affecting a constructed state."""


class CoarseStepWarning(UserWarning):
    """A discretization step is too coarse for the linearized kernel."""
