"""Exception types shared across the package."""


class RotVlasovError(Exception):
    """Base class for all package errors."""


class ConfigError(RotVlasovError):
    """Invalid or inconsistent configuration input."""


class ProfileError(RotVlasovError):
    """Base-state construction failed (no zero crossing, bad monotonicity, ...)."""


class InverseMapError(RotVlasovError):
    """Ray inversion of the deformation map failed to bracket a root."""


class MaxPrincipleViolation(RotVlasovError):
    """Reconstructed potential offset C fell below E0 + E1."""


class ConsistencyError(RotVlasovError):
    """Reconstructed potential disagrees with the deformed base potential."""


class NoConvergence(RotVlasovError):
    """Chord iteration exhausted its iteration budget."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = list(residuals) if residuals is not None else []


class AdmissibilityLost(RotVlasovError):
    """Deformation left the admissible ball during iteration."""


class VerificationError(RotVlasovError):
    """Stored state failed re-verification."""
