"""Exception types shared across the package."""


class DualLoopError(Exception):
    """Base class for errors raised by dualloop."""


class ValidationError(DualLoopError, ValueError):
    """Input failed a precondition (shape, range, unitarity, physicality)."""


class NumericalError(DualLoopError, ArithmeticError):
    """A computation lost accuracy beyond its internal consistency bound."""


class RoutingError(DualLoopError):
    """A control timeline cannot be routed (stranded or colliding pulses)."""
