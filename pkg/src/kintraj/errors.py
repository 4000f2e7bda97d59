"""Exception hierarchy shared across the package."""


class KintrajError(Exception):
    """Base class for all package errors."""


class NonIntegrableError(KintrajError, ValueError):
    """Weighted integration of a term r^q with q <= -2 diverges at the origin."""


class PoleError(KintrajError, ZeroDivisionError):
    """Evaluation at r = 0 of a term carrying a negative r-exponent."""


class ZeroPolynomialError(KintrajError, ValueError):
    """An operation that is undefined for the zero polynomial."""


class SingularSystemError(KintrajError, ArithmeticError):
    """The determinant of a linear system vanishes identically."""


class DegenerateAnsatzError(SingularSystemError):
    """The terminal system of the trajectory ansatz is singular."""


class TimeOrderError(KintrajError, ValueError):
    """Trajectory endpoints must satisfy s < t."""


class RejectedSubsolutionError(KintrajError, ValueError):
    """A candidate test function failed its residual or positivity certificate."""


class InconsistencyError(KintrajError, RuntimeError):
    """Nonzero left-hand side with vanishing right-hand side norms."""


class ArchiveError(KintrajError, ValueError):
    """A trajectory archive is malformed or fails its content hash."""
