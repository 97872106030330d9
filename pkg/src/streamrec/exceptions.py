from __future__ import annotations

from typing import Any, Optional, Sequence


class StreamRecError(Exception):
    """Base package error."""

class ConfigError(StreamRecError, ValueError):
    """Invalid hyperparameters or run configuration."""

class ParseError(StreamRecError, ValueError):
    """Malformed input line."""

    def __init__(self, message: str, lineno: Optional[int] = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)

class DataError(StreamRecError):
    """Well-formed input that cannot be used as given."""

class UnknownUserError(StreamRecError, KeyError):
    """Recommendation requested for a user without model state."""

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""

class RowExistsError(StreamRecError):
    """Factor row initialized twice."""

class MissingRowError(StreamRecError):
    """Factor row used before initialization."""

class ModelDivergenceError(StreamRecError, ArithmeticError):
    """A latent factor became non-finite."""

    def __init__(self, user: str, item: str, node: Optional[int] = None):
        self.user = user
        self.item = item
        self.node = node
        where = f" in node {node}" if node is not None else ""
        super().__init__(f"model diverged{where} while training ({user!r}, {item!r})")

class EvaluationAborted(StreamRecError):
    """Prequential run stopped early; `records` holds the completed steps."""

    def __init__(self, message: str, records: Sequence[Any]):
        self.records = list(records)
        super().__init__(message)
