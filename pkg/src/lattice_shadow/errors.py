"""Exception types shared across the package."""


class LatticeShadowError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(LatticeShadowError):
    """A parameter or configuration value violates a documented invariant."""


class InvalidLatticeError(LatticeShadowError):
    """A per-site sequence is too short or inconsistently shaped."""


class SingularLimitError(LatticeShadowError):
    """An operation that requires mu > 0 was attempted at the mu = 0 limit."""


class ConfigurationError(LatticeShadowError):
    """A numerical resolution requirement cannot be met with the given settings."""


class BlowUpError(LatticeShadowError):
    """The integrated state left the finite floating-point range."""

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time


class ConfigParseError(LatticeShadowError):
    """The configuration document could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


class FitError(LatticeShadowError):
    """A least-squares fit was requested on degenerate data."""
