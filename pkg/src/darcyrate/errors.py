"""Exception hierarchy shared by all stages of the toolkit."""


class HomogenizationError(Exception):
    """Base class; ``stage`` names the pipeline step that raised."""

    stage = "unknown"


class GeometryError(HomogenizationError, ValueError):
    stage = "geometry"


class SolidTouchesCellBoundary(GeometryError):
    pass


class DisconnectedFluid(GeometryError):
    pass


class AllSolid(GeometryError):
    pass


class ResolutionMismatch(GeometryError):
    pass


class BadPeriod(GeometryError):
    pass


class DimensionMismatch(HomogenizationError, ValueError):
    stage = "grid"


class SolverError(HomogenizationError):
    stage = "solver"


class EmptyFluid(SolverError):
    pass


class IncompatiblePeriodicSystem(SolverError):
    stage = "cell"


class SingularMatrix(SolverError):
    pass


class ResidualTooLarge(SolverError):
    pass


class IncompatibleRHS(SolverError):
    pass


class NotPositiveDefinite(HomogenizationError):
    stage = "cell"


class IncompatibleDivergenceData(HomogenizationError):
    stage = "cell"


class IncompatibleBoundaryData(HomogenizationError, ValueError):
    stage = "boundary"


class NotSPD(HomogenizationError, ValueError):
    stage = "homogenized"


class ZeroField(HomogenizationError):
    stage = "fine"


class ZeroData(HomogenizationError):
    stage = "fine"


class KernelTooSmall(HomogenizationError, ValueError):
    stage = "correctors"


class NonPositiveValue(HomogenizationError, ValueError):
    stage = "study"


class TooFewPoints(HomogenizationError, ValueError):
    stage = "study"
