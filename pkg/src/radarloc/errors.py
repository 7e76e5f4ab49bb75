"""Exception hierarchy shared across the pipeline stages."""


class RadarLocError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameterError(RadarLocError):
    """A parameter violates its documented precondition."""


class DegenerateGeometryError(RadarLocError):
    """Geometric input has no well-defined answer (coincident/collinear points)."""


class SingularMatrixError(RadarLocError):
    """A matrix that must be inverted is numerically singular."""


class NoOverlapError(RadarLocError):
    """Registration found no usable correspondences between the clouds."""

    def __init__(self, message: str, fitness: float = 0.0):
        super().__init__(message)
        self.fitness = fitness


class InvalidSpecError(RadarLocError):
    """A scenario description is inconsistent (e.g. disconnected segments)."""


class StageError(RadarLocError):
    """A pipeline stage failed; carries the stage name for diagnostics."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"stage '{stage}': {message}")
        self.stage = stage


class InputError(RadarLocError):
    """An input file is missing or malformed."""
