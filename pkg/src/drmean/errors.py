"""Exception and warning types raised across the package."""


class DrMeanError(Exception):
    """Base class for all errors raised by drmean."""


class DimensionMismatch(DrMeanError, ValueError):
    pass


class RankDeficient(DrMeanError):
    def __init__(self, rank, cols, msg=None):
        self.rank = rank
        self.cols = cols
        super().__init__(msg or f"numerical rank {rank} < {cols} columns")


class DegenerateResponse(DrMeanError):
    pass


class SeparationSuspected(DrMeanError):
    pass


class EmptyInput(DrMeanError, ValueError):
    pass


class ProbOutOfRange(DrMeanError, ValueError):
    pass


class SpanTooSmall(DrMeanError, ValueError):
    pass


class EpsilonOutOfRange(DrMeanError, ValueError):
    pass


class KnotsNotIncreasing(DrMeanError, ValueError):
    pass


class TooFewUnits(DrMeanError, ValueError):
    pass


class NoRespondents(DrMeanError):
    pass


class MissingIntercept(DrMeanError, ValueError):
    pass


class ExpressionSyntaxError(DrMeanError):
    """Malformed expression text; ``position`` is the 0-based offset."""

    def __init__(self, message, position, text=""):
        self.position = position
        self.text = text
        super().__init__(f"{message} at position {position}")


class UnknownVariable(DrMeanError):
    pass


class EvaluationError(DrMeanError):
    def __init__(self, message, unit=None):
        self.unit = unit
        self.message = message
        if unit is not None:
            message = f"{message} (unit {unit})"
        super().__init__(message)


class ConfigError(DrMeanError, ValueError):
    pass


class MalformedCsv(DrMeanError, ValueError):
    pass


class DegenerateCutsWarning(UserWarning):
    """Adjacent quantile cut points coincided and bins were merged."""


class PresentOutcomeWarning(UserWarning):
    """An outcome value was supplied for a nonrespondent and ignored."""
