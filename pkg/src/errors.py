"""
SleepFS Errors Module
Exception hierarchy shared by every SleepFS module
"""

from typing import Optional


class SleepFSError(Exception):
    """Base class for every error raised by SleepFS"""


class ShapeError(SleepFSError, ValueError):
    """Matrix or vector dimensions do not fit the operation"""


class ParamError(SleepFSError, ValueError):
    """A parameter is outside the range the operation accepts"""


class InsufficientRows(SleepFSError):
    """Not enough rows to compute a statistic"""


class NotSymmetric(SleepFSError):
    """A matrix expected to be symmetric is not"""


class NoConvergence(SleepFSError):
    """An iterative solver ran out of iterations"""

    def __init__(self, message: str, iterations: int):
        super().__init__(message)
        self.iterations = iterations


class RankDeficient(SleepFSError):
    """Least-squares design matrix does not have full column rank"""


class DataIoError(SleepFSError, OSError):
    """A data file could not be read or written"""


class SchemaError(SleepFSError):
    """CSV header does not match what was asked for"""

    def __init__(self, message: str, name: Optional[str] = None):
        super().__init__(message)
        self.name = name


class ParseError(SleepFSError):
    """A CSV cell is not a finite number"""

    def __init__(self, message: str, row: int, column: str):
        super().__init__(message)
        self.row = row
        self.column = column


class SplitError(SleepFSError):
    """A train/test split would leave one side empty"""


class FoldError(SleepFSError):
    """Fold count is incompatible with the sample count"""


class DegenerateTarget(SleepFSError):
    """The target has no variance to explain"""


class InsufficientSamples(SleepFSError):
    """Too few samples for the requested estimator"""


class StrategyError(SleepFSError):
    """Selectors cannot be combined with the requested strategy"""


class EmptyReport(SleepFSError):
    """Nothing to render"""


class ChartError(SleepFSError):
    """Importances cannot be drawn"""


class ConfigError(SleepFSError):
    """Experiment config is malformed or invalid"""

    def __init__(self, message: str, line: int = 1):
        super().__init__(f"line {line}: {message}")
        self.line = line
