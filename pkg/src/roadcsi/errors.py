"""Exception hierarchy shared by every pipeline stage."""


class RoadCsiError(Exception):
    """Base class for all errors raised by the package."""


class ConfigurationError(RoadCsiError, ValueError):
    pass


class ShapeError(RoadCsiError, ValueError):
    pass


class RangeError(RoadCsiError, IndexError):
    pass


class SingularSystemError(RoadCsiError, ArithmeticError):
    """Pilot matrix is rank deficient on at least one subcarrier."""

    def __init__(self, subcarrier: int, message: str | None = None):
        self.subcarrier = subcarrier
        super().__init__(message or f"pilot matrix is singular at pilot subcarrier {subcarrier}")


class PriorError(RoadCsiError, ValueError):
    pass


class InsufficientDataError(RoadCsiError, ValueError):
    pass


class EmptyInputError(RoadCsiError, ValueError):
    pass


class LabelError(RoadCsiError, ValueError):
    pass


class UndefinedMetricError(RoadCsiError, ZeroDivisionError):
    pass


class CaptureParseError(RoadCsiError, ValueError):
    """Sidecar document could not be parsed; ``offset`` is the byte position of the fault."""

    def __init__(self, message: str, offset: int = 0):
        self.offset = offset
        super().__init__(f"{message} (at byte {offset})")


class CaptureLengthError(RoadCsiError, ValueError):
    pass


class StageError(RoadCsiError):
    """Wraps a failure with the name of the pipeline stage that produced it."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
