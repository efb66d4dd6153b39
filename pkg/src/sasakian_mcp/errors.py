"""Exception hierarchy shared by every module of the package."""


class SasakianMCPError(Exception):
    """Base class for all package errors."""


class DomainError(SasakianMCPError, ValueError):
    """An argument lies outside the domain of the operation."""


class PoleError(DomainError, ArithmeticError):
    """Evaluation too close to a pole to be meaningful.

    Exact poles return a signed infinity instead; this error marks the
    numerically ambiguous neighbourhood around them.
    """


class SingularDenominatorError(PoleError):
    """A comparison-function normalizer vanishes (geodesic past a conjugate point)."""


class NonSymmetricProfileError(DomainError):
    """A curvature block that must be symmetric is not."""


class BlowUpError(SasakianMCPError):
    """The Riccati solution blows up: a conjugate point lies inside the interval."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class IntegrationError(SasakianMCPError, RuntimeError):
    """The ODE integrator failed (step-size underflow, non-finite state)."""


class ConstraintError(SasakianMCPError, ValueError):
    """A phase-space state violates the defining constraint of its chart."""


class PreconditionError(SasakianMCPError, ValueError):
    """A curvature bound assumed by a comparison check fails on the grid."""


class MonteCarloPrecisionError(SasakianMCPError, RuntimeError):
    """Sampling error exceeds the requested precision."""


class BeyondFirstZeroWarning(UserWarning):
    """A comparison function was evaluated past its first positive zero."""
