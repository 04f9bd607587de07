"""Exception types shared across the package."""


class HypothesisViolation(ValueError):
    """A theorem hypothesis does not hold for the supplied parameters.

    ``hypothesis`` names the violated condition in the form it is usually
    written, e.g. ``"G ∈ (0, κ/(18e√d))"``.
    """

    def __init__(self, message, hypothesis=None):
        super().__init__(message)
        self.hypothesis = hypothesis


class QuadratureError(RuntimeError):
    """Quadrature did not converge under node doubling."""


class InconclusiveError(RuntimeError):
    """A numerical check could not be decided at the requested accuracy."""
