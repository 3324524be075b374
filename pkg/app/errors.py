"""Exception hierarchy shared by the compiler, solvers and CLI.

Every error carries the process exit code the CLI maps it to so stage
failures surface consistently regardless of where they are raised.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Union


class IsingLearnError(Exception):
    """Base class for all toolchain errors."""

    exit_code: int = 1


class ConfigError(IsingLearnError):
    """Invalid network or run configuration."""

    exit_code = 2


class UnsupportedModuleError(ConfigError):
    """Requested layer, activation or loss has no polynomial constraint form."""


class EncodingError(ConfigError):
    """Invalid variable key, frozen kind or unrepresentable value."""


class MissingBitError(EncodingError):
    """An assignment does not cover every bit a polynomial refers to."""


class FormatError(ConfigError):
    """An artifact file could not be parsed."""

    def __init__(self, message: str, path: Optional[Union[str, Path]] = None, line: Optional[int] = None) -> None:
        self.path = str(path) if path is not None else None
        self.line = line
        location = ""
        if self.path is not None:
            location = self.path
        if line is not None:
            location = f"{location}:{line}" if location else f"line {line}"
        super().__init__(f"{location}: {message}" if location else message)


class SolverError(IsingLearnError):
    """Solver configuration or arithmetic failure."""

    exit_code = 3


class SolverCapError(SolverError):
    """Instance too large for exhaustive enumeration."""


class DataError(IsingLearnError):
    """Dataset acquisition or quantization failure."""

    exit_code = 4


class MetricDomainError(ValueError):
    """Metric evaluated outside its mathematical domain."""
