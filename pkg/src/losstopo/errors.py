"""Exception types raised across the package.

All errors carry enough context (indices, offending values) to locate the
failure without a debugger.
"""

from __future__ import annotations


class LossTopoError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(LossTopoError):
    """A parameter vector's length does not match the field's dimension."""

    def __init__(self, expected: int, got: int, context: str = ""):
        self.expected = expected
        self.got = got
        msg = f"dimension mismatch: expected {expected}, got {got}"
        if context:
            msg += f" ({context})"
        super().__init__(msg)


class NonFiniteValueError(LossTopoError):
    """A loss or gradient evaluation produced NaN/Inf."""

    def __init__(self, what: str, theta=None):
        self.theta = theta
        msg = f"non-finite {what}"
        if theta is not None:
            msg += f" at theta={theta!r}"
        super().__init__(msg)


class DivergenceError(LossTopoError):
    """Optimization produced a non-finite loss."""

    def __init__(self, msg: str, step: int | None = None, point: int | None = None):
        self.step = step
        self.point = point
        super().__init__(msg)


class DegenerateChordError(LossTopoError):
    """Two consecutive path points coincide, so the chord has no direction."""

    def __init__(self, index: int | None = None):
        self.index = index
        msg = "degenerate chord: points coincide"
        if index is not None:
            msg += f" at path index {index}"
        super().__init__(msg)


class DegenerateTangentError(LossTopoError):
    """Grid neighbors of a simplex sample point are collinear; no tangent plane."""

    def __init__(self, coords):
        self.coords = tuple(coords)
        super().__init__(f"degenerate tangent estimate at grid point {self.coords}")


class DatasetError(LossTopoError):
    """Malformed dataset file."""

    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        if line is not None:
            msg = f"line {line}: {msg}"
        super().__init__(msg)


class ConfigError(LossTopoError):
    """Invalid run configuration (unknown key, bad value, missing file)."""

    def __init__(self, msg: str, key: str | None = None):
        self.key = key
        if key is not None:
            msg = f"config key '{key}': {msg}"
        super().__init__(msg)
