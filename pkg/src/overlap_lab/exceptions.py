"""Shared exception types.

Every guard in the package raises one of these, so callers can tell a
usage mistake (bad shapes, bad parameters) from a numerical failure or a
capacity limit without string-matching messages.
"""


class OverlapLabError(Exception):
    """Base class for all package errors."""


class ShapeError(OverlapLabError, ValueError):
    """Operand shapes are incompatible."""


class NumericError(OverlapLabError, ValueError):
    """Non-finite input or a computation that lost numerical meaning."""


class CapacityError(OverlapLabError, ValueError):
    """Input size exceeds the hard capacity guard of an operation."""


class ParameterError(OverlapLabError, ValueError):
    """A parameter is outside its documented domain."""


class StateError(OverlapLabError, RuntimeError):
    """Operation invoked on an object missing required recorded state."""


class DegenerateDataError(OverlapLabError, ValueError):
    """Sample is degenerate for the requested statistic (constant, zero variance)."""


class FitError(OverlapLabError, RuntimeError):
    """An iterative fit failed on every restart."""


class StiffnessError(OverlapLabError, RuntimeError):
    """Adaptive ODE step size underflowed; the problem is too stiff here."""


class InsufficientPointsError(OverlapLabError, ValueError):
    """Too few points for a meaningful persistence diagram."""


class SweepError(OverlapLabError, RuntimeError):
    """A parameter sweep produced too few usable runs."""
