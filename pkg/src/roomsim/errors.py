"""Exception hierarchy shared by all toolkit modules.

Each error class maps to one CLI exit code (see cli.EXIT_CODES), so new
classes should subclass the closest existing category instead of the base.
"""


class RoomSimError(Exception):
    """Base class for all toolkit errors."""

    category = "error"


class SceneFormatError(RoomSimError):
    """Scene/layout file could not be parsed. Carries line info when known."""

    category = "parse"

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(RoomSimError):
    """A domain-type invariant was violated; message names the invariant."""

    category = "validation"


class ConfigurationError(RoomSimError):
    """Inputs are individually valid but their combination is not usable."""

    category = "configuration"


class CalibrationError(RoomSimError):
    """Absorption target unreachable for the given geometry."""

    category = "calibration"


class DesignError(RoomSimError):
    """A synthesis element (FDN, filter) cannot be constructed as requested."""

    category = "design"


class StabilityError(RoomSimError):
    """Recursive structure would have loop gain >= 1."""

    category = "stability"


class DomainError(RoomSimError):
    """Geometric precondition violated (e.g. source outside its room)."""

    category = "domain"


class DegenerateGeometryError(RoomSimError):
    """Distance or basis collapsed below usable resolution."""

    category = "degenerate"


class CoverageError(RoomSimError):
    """Direction set does not cover the sphere densely enough."""

    category = "coverage"


class FormatError(RoomSimError):
    """Audio payload has the wrong rate, channel count, or encoding."""

    category = "format"


class AnalysisError(RoomSimError):
    """Signal cannot be analyzed (e.g. silent channel)."""

    category = "analysis"


class DecayRangeError(AnalysisError):
    """EDC does not reach the level needed by the requested estimate."""

    category = "range"

    def __init__(self, message: str, achieved_floor_db: float | None = None):
        super().__init__(message)
        self.achieved_floor_db = achieved_floor_db


class ComparisonError(RoomSimError):
    """Two impulse responses are not comparable (rate/layout mismatch)."""

    category = "comparison"


class NormalizationError(RoomSimError):
    """Loudness normalization impossible (silent stimulus)."""

    category = "normalization"


class SequencingError(RoomSimError):
    """Experiment response arrived out of order or twice."""

    category = "sequencing"


class BuildError(RoomSimError):
    """Experiment session could not be assembled (missing stimuli)."""

    category = "build"


class StartupError(RoomSimError):
    """Experiment service cannot start; message lists the gaps."""

    category = "startup"
