"""Error hierarchy shared by every laplace-asym module."""


class LaplaceAsymError(Exception):
    """Base class for all library errors."""


class FieldError(LaplaceAsymError, ValueError):
    """Bad field construction or an unsupported derivative request."""


class EigenConvergenceError(LaplaceAsymError, RuntimeError):
    """Cyclic Jacobi did not reach the off-diagonal tolerance."""


class NotNegativeDefiniteError(LaplaceAsymError, ValueError):
    """A matrix that must be negative definite is not."""


class BoundaryMaximumError(LaplaceAsymError, ValueError):
    """The maximum sits on (or within the margin of) the box boundary."""


class NewtonConvergenceError(LaplaceAsymError, RuntimeError):
    """Damped Newton ran out of iterations."""


class AssumptionViolation(LaplaceAsymError, ValueError):
    """One or more hard assumptions failed.

    Parameters
    ----------
    tags : list of str
        Failing assumption tags such as ``"A(ii)"`` or ``"B"``.
    message : str
        Human readable summary.
    """

    def __init__(self, tags, message=""):
        self.tags = list(tags)
        text = message or "assumption check failed"
        super().__init__(f"{text} [{', '.join(self.tags)}]")


class DegenerateLeadingTermError(LaplaceAsymError, ValueError):
    """The leading coefficient vanishes although Assumption (B) holds."""


class QuadratureError(LaplaceAsymError, RuntimeError):
    """Quadrature rule construction or node budget failure."""


class OracleConvergenceError(LaplaceAsymError, RuntimeError):
    """The reference integral did not reach its relative tolerance."""


class RateFitError(LaplaceAsymError, ValueError):
    """Not enough usable points for a log-log fit."""


class ProblemFileError(LaplaceAsymError, ValueError):
    """Malformed problem file."""
