"""Exception types raised by the numerical pipeline."""


class ThinObsError(Exception):
    """Base class for all pipeline failures."""


class IntegrationError(ThinObsError, RuntimeError):
    """An ODE integration stalled (step-size underflow) or produced non-finite values."""


class NearZeroError(ThinObsError, ArithmeticError):
    """A division was requested by a quantity below the zero threshold."""


class GrowthBoundError(ThinObsError, AssertionError):
    """A forced profile violated its a-priori derivative growth bound."""


class ConvergenceError(ThinObsError, RuntimeError):
    """An iterative solver did not reach its tolerance.

    The last residual is kept on the instance so callers can log it.
    """

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class NegativeCurvatureError(ConvergenceError):
    """Conjugate gradients met a direction with non-positive curvature."""


class BracketError(ThinObsError, RuntimeError):
    """A root bracket was lost or never held a sign change."""

    def __init__(self, message, c_lo=None, c_hi=None, history=None):
        super().__init__(message)
        self.c_lo = c_lo
        self.c_hi = c_hi
        self.history = history or []


class NodalSignError(ThinObsError, RuntimeError):
    """An eigenfunction changed sign in the equatorial band where it must not."""
