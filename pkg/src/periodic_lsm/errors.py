"""Exception types raised across the package."""


class LSMError(Exception):
    """Base class for all package errors."""


class WoodAnomaly(LSMError):
    """Some vertical wavenumber beta_n vanishes (a Rayleigh mode grazes)."""


class CoincidentPoints(LSMError):
    pass


class VerticalCoincidence(LSMError):
    """Spectral series requested on the plane x_last == y_last."""


class InsufficientSampling(LSMError):
    pass


class NotTangential(LSMError):
    pass


class EvaluationAboveSources(LSMError):
    """Field generated by sources on the measurement line evaluated at or above it."""


class AlphaMismatch(LSMError):
    pass


class SingularSystem(LSMError):
    pass


class NonpositiveAlpha(LSMError):
    """Tikhonov parameter must be strictly positive."""


class DiscrepancyUnsolvable(LSMError):
    """Morozov's discrepancy equation has no root for this right-hand side."""


class NoCrossing(LSMError):
    pass


class ConfigError(LSMError):
    """Experiment configuration failed validation."""


class MatrixFormatError(LSMError):
    """A near-field matrix file could not be parsed."""
