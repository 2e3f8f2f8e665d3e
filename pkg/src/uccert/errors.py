"""Exception types shared across the toolkit.

Every error that a caller can meaningfully catch gets its own class, all
rooted at ``UccertError``; contract violations double as ``ValueError`` and
runtime failures as ``RuntimeError`` so generic handlers behave as expected.
"""


class UccertError(Exception):
    """Base class for every error raised by this package."""


class ContractViolation(UccertError, ValueError):
    """A documented precondition was violated by the caller."""


class SignatureError(ContractViolation):
    """Matrix does not have the required (n-1, 1) signature."""


class ChartError(UccertError, RuntimeError):
    """Coordinate chart is singular or inconsistent at the requested point."""


class InsufficientSamples(UccertError, RuntimeError):
    """A sampler could not produce any usable points."""


class DegenerateConstraintSet(UccertError, RuntimeError):
    """The tangent null-direction set at the base point is empty."""


class NondegeneracyViolation(UccertError, RuntimeError):
    """A quantity that must be strictly positive came out at or below tolerance."""


class InternalInconsistency(UccertError, RuntimeError):
    """Two independent evaluation routes disagreed beyond tolerance."""


class HypothesisError(UccertError, RuntimeError):
    """Inputs do not satisfy the hypotheses a verification run requires."""


class SupportError(ContractViolation):
    """A test function's support touches or leaves the working box."""


class FitError(UccertError, RuntimeError):
    """A least-squares fit is ill-conditioned (too few usable samples)."""


class ResolutionError(ContractViolation):
    """Requested smoothing width is not resolved by the grid."""


class RangeError(ContractViolation):
    """A weight or exponent is outside the representable floating-point range."""
