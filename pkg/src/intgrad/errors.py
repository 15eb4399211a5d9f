"""Exception hierarchy shared by every module."""


class IntgradError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(IntgradError, ValueError):
    pass


class GraphError(IntgradError, ValueError):
    """Malformed graph, unknown input name, or invalid node reference."""


class DomainError(IntgradError, ValueError):
    """Input outside an op's documented domain (non-finite values, bad indices)."""


class TrainingDivergedError(IntgradError, RuntimeError):
    pass


class ModelFormatError(IntgradError, ValueError):
    """Base class for model file errors."""


class MalformedModelError(ModelFormatError):
    pass


class ModelVersionError(ModelFormatError):
    pass


class ModelShapeError(ModelFormatError):
    pass


class InputFormatError(IntgradError, ValueError):
    """An input, baseline, or box file could not be parsed."""
