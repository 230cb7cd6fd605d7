"""Exception taxonomy shared by all modules."""


class ShrinkTargetError(Exception):
    """Base class for all library errors."""


class DomainError(ShrinkTargetError):
    """A point lies outside the map's domain."""


class UnsupportedMapError(ShrinkTargetError):
    """The requested operation does not support this map kind."""


class ParameterError(ShrinkTargetError):
    """An argument violates a documented precondition."""


class InputExhaustedError(ShrinkTargetError):
    """A bit stream or data source ran out before the computation finished."""


class ResourceLimitError(ShrinkTargetError):
    """An exact computation would exceed a configured size cap."""


class ConvergenceError(ShrinkTargetError):
    """An iterative solver hit its iteration cap.

    Carries the last iterate in ``last_value`` when available.
    """

    def __init__(self, message, last_value=None):
        super().__init__(message)
        self.last_value = last_value


class ConfigError(ShrinkTargetError):
    """A configuration document failed validation.

    ``line`` is the 1-based line number of the offending entry when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
