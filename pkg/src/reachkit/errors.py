"""Exception types shared across reachkit modules."""


class DimensionError(ValueError):
    """Matrix or vector dimensions are inconsistent with the operation."""


class IntervalError(ValueError):
    """A time interval [t0, t1] is empty, reversed, or outside the horizon."""


class NumericRangeError(ArithmeticError):
    """A computation overflowed or produced non-finite values."""


class UnreachableTargetError(ValueError):
    """The requested terminal state is outside the reachable subspace."""


class UnsupportedConfigurationError(ValueError):
    """The system shape (e.g. multi-input) is outside the method's scope."""


class UnsupportedDimensionError(ValueError):
    """Geometric dimension outside the supported range (2-4)."""


class DegenerateGeometryError(ValueError):
    """Operation requires a full-dimensional polytope."""


class ConfigError(ValueError):
    """A run configuration failed validation."""
