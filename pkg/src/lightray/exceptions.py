"""Exception types shared across the package."""


class LightrayError(Exception):
    """Base class for all package errors."""


class DomainError(LightrayError, ValueError):
    """A point lies outside the region where a field or metric is defined."""


class TrappedRayError(LightrayError, RuntimeError):
    """A geodesic failed to leave the manifold within the allowed length."""


class ConfigurationError(LightrayError, ValueError):
    """Invalid experiment configuration or inconsistent inputs."""


class ConditioningError(LightrayError, ValueError):
    """A linear system is too ill-conditioned to be solved reliably."""


class MemoryCapError(LightrayError, MemoryError):
    """An operator would exceed the configured memory budget."""


class GridFormatError(LightrayError, ValueError):
    """A grid file on disk is malformed or inconsistent with its metadata."""


class InstabilityError(LightrayError, FloatingPointError):
    """A time-stepping scheme produced non-finite values."""
