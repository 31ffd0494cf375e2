"""
Exception hierarchy for hidex.
Every library error carries an ErrorCode for programmatic handling.
"""

from enum import Enum


class ErrorCode(str, Enum):
    """Standard error codes for programmatic error handling."""
    INVALID_PARAMS = "INVALID_PARAMS"
    SHAPE_MISMATCH = "SHAPE_MISMATCH"
    DEGENERATE_MESSAGE = "DEGENERATE_MESSAGE"
    CONSTRUCTION_FAILED = "CONSTRUCTION_FAILED"
    INVALID_CONFIG = "INVALID_CONFIG"
    IO_FAILED = "IO_FAILED"
    NOT_FOUND = "NOT_FOUND"
    TIMEOUT = "TIMEOUT"
    CANCELLED = "CANCELLED"
    EXECUTION_FAILED = "EXECUTION_FAILED"
    INTERNAL_ERROR = "INTERNAL_ERROR"


class HidexError(Exception):
    """Base class for all hidex errors."""
    code: ErrorCode = ErrorCode.INTERNAL_ERROR


class ParameterError(HidexError, ValueError):
    """A numeric parameter is outside its valid range."""
    code = ErrorCode.INVALID_PARAMS


class ShapeError(HidexError, ValueError):
    """Array lengths or dimensions do not line up."""
    code = ErrorCode.SHAPE_MISMATCH


class DegenerateMessageError(HidexError, ArithmeticError):
    """
    A message lost all of its probability mass.

    Raised when every mixture or hypothesis weight underflows at some
    time step, which means the prior and the observation are incompatible
    at working precision.
    """
    code = ErrorCode.DEGENERATE_MESSAGE

    def __init__(self, message: str, time_index: int | None = None, stage: str | None = None):
        details = []
        if stage:
            details.append(f"stage={stage}")
        if time_index is not None:
            details.append(f"i={time_index}")
        suffix = f" ({', '.join(details)})" if details else ""
        super().__init__(f"{message}{suffix}")
        self.time_index = time_index
        self.stage = stage


class ConstructionError(HidexError, RuntimeError):
    """A code could not be built from the requested profile."""
    code = ErrorCode.CONSTRUCTION_FAILED


class ConfigurationError(HidexError, ValueError):
    """Experiment or receiver configuration is unusable."""
    code = ErrorCode.INVALID_CONFIG


class OutputError(HidexError, OSError):
    """Writing or reading a result file failed."""
    code = ErrorCode.IO_FAILED

    def __init__(self, message: str, path: str):
        super().__init__(f"{message}: {path}")
        self.path = path


class SweepCancelled(HidexError):
    """A running sweep was stopped between trial batches."""
    code = ErrorCode.CANCELLED
