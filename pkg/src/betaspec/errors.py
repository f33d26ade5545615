"""Exception types shared across the package.

Two broad families: parameter/usage problems (``ValidationError``) and
numerical failures detected at run time (``NumericError``). The CLI maps
them to distinct exit codes.
"""


class BetaspecError(Exception):
    """Base class for all package errors."""


class ValidationError(BetaspecError):
    """Invalid parameters or inputs supplied by the caller."""


class NumericError(BetaspecError):
    """A numerical contract was violated during computation."""


# --- parameter validation -------------------------------------------------

class NonPositive(ValidationError):
    """A ratio that must be strictly positive is not."""


class DegenerateRegime(ValidationError):
    """Aspect ratios violate yY/(y+Y) in (0,1); the matrix pencil degenerates."""


class BadMoment(ValidationError):
    """Fourth moment below the Jensen bound, or symmetry indicator not in {0,1}."""


class IntervalCollapse(ValidationError):
    """Analyticity interval [c_l, c_r] is empty for the given parameters."""


class DimensionMismatch(ValidationError):
    """Data dimensions incompatible with the two-sample model (needs p < n+N)."""


class AtomDivergence(ValidationError):
    """Test function diverges at an atom carrying positive mass."""


# --- numerical failures ----------------------------------------------------

class NearSingularPencil(NumericError):
    """Smallest eigenvalue of S + alpha*T fell below the invertibility floor."""


class QuadratureFailure(NumericError):
    """Adaptive integration did not reach the requested tolerance."""


class BranchAmbiguity(NumericError):
    """No square-root branch satisfies the Stieltjes-transform constraints."""


class SingularPoint(NumericError):
    """A transform-chain denominator vanished at the evaluation point."""


class NoConvergence(NumericError):
    """Damped fixed-point iteration exhausted its iteration budget."""


class NotInUpperHalfPlane(NumericError):
    """Fixed-point iterate converged outside the upper half plane."""


class SingularContour(NumericError):
    """Contour is degenerate or passes through a singular point."""


class ContourCollision(NumericError):
    """The two covariance contours are not strictly nested."""


class ImaginaryResidue(NumericError):
    """A nominally real contour integral kept a large imaginary part."""


class DegenerateEigenvalue(NumericError):
    """An eigenvalue sits at 0 or 1, so the log-determinant statistic is undefined."""


class VarianceNonpositive(NumericError):
    """CLT variance evaluated to a non-positive value."""
