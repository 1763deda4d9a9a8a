"""
Exception hierarchy shared by every subpackage.

DataError subclasses map to CLI exit code 2; usage problems are reported by click
and map to exit code 1.
"""


class DlaError(Exception):
    """Base class for all toolkit errors"""


class DataError(DlaError):
    """The input data cannot be processed"""


class ConfigError(DataError):
    pass


class MalformedXml(DataError):
    pass


class UnsupportedSchema(DataError):
    pass


class DetectionFormatError(DataError):
    """A detections interchange record does not follow the documented grammar"""

    def __init__(self, message: str, line_number: int = 0):
        if line_number:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class DimensionMismatch(DataError):
    pass


class LabelOutOfRange(DataError):
    pass


class EmptyAccumulator(DataError):
    pass


class EmptyInput(DataError):
    pass


class EmptyMask(DataError):
    pass


class DegenerateBaseline(DataError):
    pass


class NonPositiveAnchor(DataError):
    pass
