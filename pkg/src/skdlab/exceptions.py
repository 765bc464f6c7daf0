"""Exception types shared across the library.

All library errors derive from :class:`SkdlabError` so callers can catch one
base class. The CLI maps these onto exit codes: configuration and parsing
problems exit with 2, runtime/numeric failures with 3.
"""


class SkdlabError(Exception):
    """Base class for all skdlab errors."""


class ConfigError(SkdlabError, ValueError):
    """Invalid configuration value or an inconsistent combination of values."""


class ShapeError(SkdlabError, ValueError):
    """Array arguments have incompatible shapes or dimensions."""


class StateError(SkdlabError, RuntimeError):
    """Operation called out of order (e.g. backward before forward)."""


class ParseError(SkdlabError, ValueError):
    """Malformed input file. Carries the offending 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class RunError(SkdlabError, RuntimeError):
    """A training run failed (divergence, missing checkpoint, bad output dir)."""


class MetricUndefinedError(SkdlabError, ValueError):
    """Metric undefined on the given input (e.g. correlation of a constant)."""
