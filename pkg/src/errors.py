"""
Exception hierarchy for flipforge.

Every error raised by the pipeline carries a message and an optional list of
structured details, so that the command line can report them uniformly.
"""

from typing import List, Optional

from src.schemas.responses import ErrorDetail


class FlipForgeError(Exception):
    """Base exception for all pipeline errors."""

    def __init__(self, message: str, details: Optional[List[ErrorDetail]] = None) -> None:
        """Initialize the exception.

        Args:
            message: Error message
            details: Detailed error information
        """
        self.message = message
        self.details = details or []
        super().__init__(self.message)


class ConfigError(FlipForgeError):
    """Raised for invalid run configurations or missing input files."""


class AsmSyntaxError(FlipForgeError):
    """Raised when assembly source does not conform to the grammar."""

    def __init__(self, message: str, line: int, column: int = 1) -> None:
        self.line = line
        self.column = column
        super().__init__(
            f"line {line}, column {column}: {message}",
            [ErrorDetail(code="syntax", message=message, details={"line": line, "column": column})],
        )


class LayoutError(FlipForgeError):
    """Raised when a section layout is inconsistent with its program."""


class InvalidBenchmarkError(FlipForgeError):
    """Raised when the golden run traps, exceeds the step cap or breaks the layout."""


class TraceMismatchError(FlipForgeError):
    """Raised when an error site cannot be located during replay."""


class SensitivityError(FlipForgeError):
    """Raised when a section cannot be perturbed stably."""


class PropagationError(FlipForgeError):
    """Raised when SDC specifications cannot be composed."""


class ContractViolation(FlipForgeError):
    """Raised when an operation is called outside its preconditions."""


class LayoutDriftError(FlipForgeError):
    """Raised when two program versions do not share a section id space."""


class PipelineError(FlipForgeError):
    """Wraps a component error with the pipeline stage it occurred in."""

    def __init__(self, stage: str, cause: FlipForgeError) -> None:
        self.stage = stage
        self.cause = cause
        super().__init__(cause.message, cause.details)
