"""Exception types shared across the package."""


class SeadetError(Exception):
    """Base class for all errors raised by this package."""


class InvalidImageGeometryError(SeadetError):
    """Raised for non-positive image dimensions."""


class DegenerateBoxError(SeadetError):
    """Raised when a box collapses below 1e-9 px after conversion/clamping."""


class DatasetValidationError(SeadetError):
    """Raised when a Dataset violates its structural invariants."""


class SplitPurityError(DatasetValidationError):
    """Raised when a val/test image carries a non-real domain."""


class PatchPoolEmptyError(SeadetError):
    """Raised when augmentation needs patches for a class that has none."""


class SamplerError(SeadetError):
    """Raised for unsatisfiable sampling requests (e.g. no real images)."""


class KernelError(SeadetError):
    """Raised for invalid detection-kernel inputs (depth, query count...)."""


class MatchingError(SeadetError):
    """Raised when a one-to-one assignment is infeasible (fewer preds than gt)."""


class EvalError(SeadetError):
    """Raised for unusable evaluation inputs (e.g. no supported classes)."""


class ConfigError(SeadetError):
    """Raised for malformed or unknown configuration keys."""
