"""Exception hierarchy shared across the package."""


class SoftbeamError(Exception):
    """Base class for all errors raised by this package."""


class ContractViolation(SoftbeamError):
    """An operation was called with arguments that break its contract
    (shape mismatch, bad length, out-of-range scalar, ...)."""


class NumericOverflow(SoftbeamError):
    """A forward computation produced NaN or Inf.  Raised immediately so
    annealing/learning-rate bugs surface instead of being clamped away."""


class DataError(SoftbeamError):
    """Malformed corpus file, unknown token, or empty split."""


class ConfigError(SoftbeamError):
    """Invalid or inconsistent training configuration."""


class ProtocolError(SoftbeamError):
    """A procedural assumption was violated (e.g. a function that must be
    deterministic returned two different values)."""
