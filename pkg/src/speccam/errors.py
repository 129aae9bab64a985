"""Exception hierarchy.

Every domain failure derives from :class:`SpecCamError` so the CLI can map it
to exit code 2; plain ``OSError`` is reserved for I/O (exit code 3).
"""


class SpecCamError(ValueError):
    """Base class for validation and domain errors."""


class EmptyInput(SpecCamError):
    pass


class GridMismatch(SpecCamError):
    pass


class DegenerateNormalizer(SpecCamError):
    pass


class BandNotFound(SpecCamError):
    pass


class SingularCalibration(SpecCamError):
    pass


class ChartMismatch(SpecCamError):
    pass


class LayoutTooFine(SpecCamError):
    pass


class ProfileNotFound(SpecCamError):
    pass


class ProfileCorrupt(SpecCamError):
    pass


class RoiOutOfBounds(SpecCamError):
    pass


class BadRange(SpecCamError):
    pass


class TrainingDiverged(SpecCamError):
    pass


class BadHyperparameter(SpecCamError):
    pass


class FeatureModeMismatch(SpecCamError):
    pass


class SubsetTooSmall(SpecCamError):
    pass


class UndefinedCorrelation(SpecCamError):
    pass


class UndefinedRegression(SpecCamError):
    pass


class DegenerateRoc(SpecCamError):
    pass


class FormatError(SpecCamError):
    """A file parsed but its content violates the declared format."""
