"""Exception hierarchy.

Everything raised on purpose derives from PimgoldError so callers (and the
CLI) can map failures to exit codes without matching on builtins.
"""


class PimgoldError(Exception):
    """Base class for all package errors."""


class InvalidGeometry(PimgoldError):
    """An architecture invariant is violated (non power-of-two k, empty grid, ...)."""


class ConfigError(PimgoldError):
    """A config file cannot be parsed, or contains an unknown or missing key."""


class OutOfRange(PimgoldError):
    """A bit-cell address falls outside the register file."""


class OverlapError(PimgoldError):
    """Operand bit ranges collide in a way the datapath cannot honor."""


class WidthError(PimgoldError):
    """An operand width is inconsistent with the operation or the accumulator."""


class TopologyError(PimgoldError):
    """A hop targets the sending block itself or crosses the fabric boundary."""


class MappingError(PimgoldError):
    """A problem does not fit onto the configured fabric."""


class AccumulatorOverflow(PimgoldError):
    """A reduction result exceeded the accumulator width."""


class BadOperand(PimgoldError):
    """An instruction field is out of range for the encoding or the machine."""


class UnknownMnemonic(PimgoldError):
    """Program text names an operation the assembler does not know."""


class InsufficientData(PimgoldError):
    """Too few or non-distinct data points to fit the latency model."""


class DegenerateDesign(PimgoldError):
    """The fit basis is numerically rank-deficient for the given points."""


class DomainError(PimgoldError):
    """A closed-form latency formula was evaluated outside its domain."""


class UnsupportedDesign(PimgoldError):
    """The named design has no usable published latency model."""
