"""Exception hierarchy shared by every part of the engine."""


class EngineError(Exception):
    """Base class for all errors raised by tensorgeo."""


class ShapeError(EngineError, ValueError):
    """Shapes are malformed or inconsistent with an operation."""


class CoordinateError(EngineError, ValueError):
    pass


class AxisError(ShapeError):
    pass


class RegionBoundsError(EngineError, IndexError):
    """A region maps a coordinate outside its source or destination buffer."""


class OverlapError(EngineError):
    """Two coordinates of a raster write the same destination element."""


class TransformError(EngineError, ValueError):
    pass


class UnsupportedError(EngineError, NotImplementedError):
    """An operator, variant or composite kind is not available."""


class CycleError(EngineError):
    pass


class ModeError(EngineError):
    """Control flow reached an executor that cannot handle it."""


class RunawayLoopError(EngineError):
    pass


class InfeasibleError(EngineError, ValueError):
    pass


class NoBackendError(EngineError):
    pass


class GraphFormatError(EngineError, ValueError):
    """A graph, tensor or catalog document could not be parsed."""


class SpecError(EngineError, ValueError):
    """A backend description is incomplete or contradictory."""


class DivergenceError(EngineError):
    """Training produced a non-finite loss."""
