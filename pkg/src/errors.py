"""
Error types raised across the package.

Each error subclasses the builtin it most resembles so callers that only
know about ValueError / KeyError keep working.
"""

from typing import Iterable, Optional


class ShapeError(ValueError):
    """Array dimensions do not agree."""


class ConfigError(ValueError):
    """A hyperparameter, path or command option is invalid."""


class CorpusParseError(ValueError):
    """A lexical-sample or key file could not be parsed."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        location = ""
        if path is not None:
            location = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(f"{location}{message}")
        self.path = path
        self.line = line


class GloveFormatError(CorpusParseError):
    """A GloVe vector file is malformed or has the wrong dimension."""


class ModelFormatError(ValueError):
    """A model file has a bad magic number or unsupported version."""


class CorruptModelError(ModelFormatError):
    """A model file ends early or carries trailing bytes."""


class InventoryError(KeyError):
    """A lexelt or sense is not part of the sense inventory."""


class GoldKeyError(KeyError):
    """Predictions reference instances that the gold key does not contain."""

    def __init__(self, missing: Iterable[str]):
        self.missing = sorted(missing)
        preview = ", ".join(self.missing[:10])
        more = f" (+{len(self.missing) - 10} more)" if len(self.missing) > 10 else ""
        super().__init__(f"No gold entry for {len(self.missing)} instance(s): {preview}{more}")


class TrainingStateError(RuntimeError):
    """A forward trace does not match the parameters it is used with."""


class DivergenceError(ArithmeticError):
    """Training produced a non-finite loss or gradient."""
