"""Exception types shared across the package."""


class CuspTrackError(Exception):
    """Base class for all package-specific errors."""


class SingularMatrixError(CuspTrackError):
    """Matrix is singular to working tolerance; carries a condition estimate."""

    def __init__(self, message, cond_estimate=None):
        super().__init__(message)
        self.cond_estimate = cond_estimate


class DegenerateSpectrumError(CuspTrackError):
    """Eigenvalue gap below tolerance where a simple spectrum is required."""


class NoConvergenceError(CuspTrackError):
    """Iteration budget exhausted without meeting the tolerance."""


class CollisionError(CuspTrackError):
    """Eigenvalue collision on path: the loop passes too near a degeneracy."""

    def __init__(self, message, t=None, gap=None):
        super().__init__(message)
        self.t = t
        self.gap = gap


class GaugeDriftError(CuspTrackError):
    """Gauge diagnostics (column norms or residual) exceeded tolerance."""


class AmbiguousPatternError(CuspTrackError):
    """Monodromy matrix has no clear permutation pattern."""


class ConstantLoopError(CuspTrackError):
    """Matrix function does not vary along the loop."""


class ExprError(CuspTrackError):
    """Base for expression front-end errors; carries a byte offset."""

    def __init__(self, message, offset):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset
        self.message = message


class ParseError(ExprError):
    """Lexical or syntax error in an expression string."""


class EvalError(ExprError):
    """Runtime evaluation error (division by zero, non-integer exponent)."""
