"""Exception types shared across the package."""


class WeakOtError(Exception):
    """Base class for all errors raised by this package."""


class EmptySupport(WeakOtError):
    """A measure was constructed without any support point."""


class NegativeWeight(WeakOtError):
    """Weights must be nonnegative with a positive total."""


class DimensionMismatch(WeakOtError):
    """Array shapes or ambient dimensions do not agree."""


class NonFiniteValue(WeakOtError):
    """NaN or infinity encountered where finite data is required."""


class ZeroRowWeight(WeakOtError):
    """Conditional means are undefined for zero-weight source atoms."""


class NotConverged(WeakOtError):
    """An iterative solver exhausted its budget before reaching tolerance."""


class InstanceTooLarge(WeakOtError):
    """Problem size exceeds the configured cap for the exact solver."""


class DegenerateMarginals(WeakOtError):
    """Zero-weight atoms are not accepted by the exact transport solver."""


class NumericalUnderflow(WeakOtError):
    """Linear-domain scaling underflowed; the regularization is too small."""


class StreamExhausted(WeakOtError):
    """The measure stream ended before the requested number of steps."""


class InvalidScheduleParameter(WeakOtError):
    """Step-size schedule parameters violate the summability conditions."""


class InvalidSpec(WeakOtError):
    """A generator specification is out of its documented ranges."""


class UnsupportedFormat(WeakOtError):
    """Input bytes are not an 8-bit plain or raw PGM image."""


class AllZeroImage(WeakOtError):
    """An all-black image carries no mass and defines no measure."""


class ParseError(WeakOtError):
    """Malformed measure file; carries 1-based line and column indices."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + where)
