"""Exception types shared across the package."""


class SpadeSenseError(Exception):
    """Base class for all package errors."""


class ParameterError(SpadeSenseError, ValueError):
    """A parameter is outside its allowed range."""


class DomainError(SpadeSenseError, ArithmeticError):
    """The requested quantity is undefined at this point (e.g. negative variance)."""


class ConvergenceError(SpadeSenseError, RuntimeError):
    """A numerical procedure did not reach its tolerance."""


class CutoffError(ConvergenceError):
    """A truncated mode sum has not converged at the chosen cutoff."""


class DegenerateEstimatorError(SpadeSenseError, ArithmeticError):
    """The moment estimator has no information about the separation."""
