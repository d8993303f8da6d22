"""Exception types shared across the package."""


class DdeError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(DdeError, ValueError):
    """A model, dataset, or configuration violates an invariant."""


class ShapeError(ValidationError):
    """Array dimensions are inconsistent."""


class CapacityError(DdeError):
    """An exact-enumeration routine was asked to exceed its latent-bit cap."""


class NumericError(DdeError):
    """A numerical routine failed (non-finite objective, SVD breakdown, ...)."""


class UnsupportedFamilyError(DdeError, ValueError):
    """An operation was called with an observed family it does not support."""
