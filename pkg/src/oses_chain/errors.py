"""Exception types shared across the package."""


class OsesError(Exception):
    """Base class for all package errors."""


class SectorError(OsesError, ValueError):
    """State is not confined to the single-excitation sector."""


class IntegrationDivergedError(OsesError, RuntimeError):
    """A sampled state violated the density-matrix invariants during integration."""

    def __init__(self, time, reason):
        self.time = time
        self.reason = reason
        super().__init__(f"integration diverged at t={time:.6g}: {reason}")


class CapabilityError(OsesError, ValueError):
    """Requested method is not available at this system size."""


class NonFactorizableError(OsesError, ValueError):
    """Decoherence factors do not factorize into per-site contributions."""


class TruncationBudgetError(OsesError, RuntimeError):
    """Accumulated MPS discarded weight exceeded the configured budget."""


class NumericalError(OsesError, RuntimeError):
    """An eigen/singular value solver failed."""
