"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class SpatialHOMError(Exception):
    """Base class for every error raised by this package."""


class ModelError(SpatialHOMError):
    """Numeric or model error (CLI exit status 3)."""


class DomainError(ModelError, ValueError):
    """An argument lies outside the domain of the operation."""


class ResolutionError(ModelError):
    """A sampling grid is too coarse or too narrow for the requested transform."""


class UnsupportedModelError(ModelError):
    """The closed-form law does not apply to the given model."""


class ShapeError(ModelError, ValueError):
    pass


class SizeError(ModelError, ValueError):
    pass


class ApertureError(ModelError):
    pass


class SamplingOverflowError(ModelError):
    pass


class FitError(ModelError):
    pass


class RankError(FitError):
    pass


class StructureError(ModelError):
    """No fringe structure could be detected."""


class ConfigError(SpatialHOMError):
    """Invalid run configuration (CLI exit status 2)."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        self.key = key
        self.line = line
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
