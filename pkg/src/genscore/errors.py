"""Exception hierarchy shared across the package."""


class GenscoreError(Exception):
    """Base class for all package errors."""


class ValidationError(GenscoreError):
    """Invalid data: malformed files, broken invariants, bad values."""


class BackendError(GenscoreError):
    """A scoring backend failed: unknown token, protocol error, timeout."""


class ConfigError(GenscoreError):
    """Inconsistent or unusable configuration."""
