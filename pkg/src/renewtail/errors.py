"""Exception types shared across the package."""


class RenewtailError(Exception):
    """Base class for all package errors."""


class ConfigError(RenewtailError, ValueError):
    """Malformed or inconsistent run configuration / distribution parameters."""


class CertificationError(RenewtailError, ArithmeticError):
    """A numerical truncation could not be certified to the requested tolerance."""


class NoBracketError(CertificationError):
    """Calibration scan found no sign change of ``g(theta) - target``."""


class RegimeError(RenewtailError, ValueError):
    """A predictor was called outside the regime it applies to."""
