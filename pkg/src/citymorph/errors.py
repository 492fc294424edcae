"""Exception types shared across the package."""


class CityMorphError(Exception):
    """Base class for all package-specific errors."""


class GridFormatError(CityMorphError):
    """Raised when a raster grid file is malformed or contains illegal values."""


class ManifestError(CityMorphError):
    """Raised when a corpus manifest is malformed or inconsistent."""


class EmptyClassError(CityMorphError):
    """Raised when a metric is requested for a raster with no occupied cells."""


class ProjectionError(CityMorphError):
    """Raised when road coordinates look geographic instead of projected meters."""


class SingularSystemError(CityMorphError):
    """Raised when a normal-equations or kernel system cannot be factorized.

    Usually means the regularizer is zero and the inputs are collinear or
    duplicated; retry with a positive regularizer.
    """
