"""Exception types shared across the package."""


class MobisimError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(MobisimError, ValueError):
    """A value, configuration, or document violates its contract."""


class DegenerateModelError(ValidationError):
    """Model parameters admit no meaningful equilibrium analysis."""


class ParseError(ValidationError):
    """A scenario or trajectory document could not be parsed."""

    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column


class NumericalError(MobisimError):
    """Integration failed numerically; carries the time and step size."""

    def __init__(self, message, t=None, h=None):
        super().__init__(message)
        self.t = t
        self.h = h


class MaxStepsError(NumericalError):
    """Step budget exhausted before reaching the end of the horizon."""


class StiffnessError(NumericalError):
    """Adaptive step size underflowed; the problem looks stiff."""
