"""Exception and warning types raised across the package."""


class UrnflowError(Exception):
    """Base class for all package errors."""


class Degenerate(UrnflowError):
    """The mean matrix has spectral radius zero."""


class NotPrimitiveWarning(UserWarning):
    """No power of the mean matrix up to the Wielandt bound is entrywise positive."""


class ClusterAmbiguity(UrnflowError):
    """Two eigenvalue clusters are too close to be separated reliably."""


class OnSqrtRhoAmbiguity(UrnflowError):
    """An eigenvalue modulus is too close to sqrt(rho) to classify."""


class InvalidLaw(UrnflowError, ValueError):
    """A replacement law violates its invariants."""


class BudgetExceeded(UrnflowError):
    """An enumeration or simulation outgrew its configured budget."""

    def __init__(self, message, reached=None):
        super().__init__(message)
        self.reached = reached


class AlreadyExtinct(UrnflowError):
    """step() was called on an urn state that is already extinct."""


class InsufficientDepth(UrnflowError):
    """A simulated tree is too shallow for the requested count."""


class NotReached(UrnflowError):
    """The requested stopping time does not exist in the simulated tree."""


class SingularResolvent(UrnflowError):
    """A_i - I is singular on the range of its spectral projection."""


class TailNotConvergent(UrnflowError):
    """A variance series has a geometric tail ratio >= 1."""


class DegenerateVariance(UrnflowError):
    """The limiting Gaussian variance vanishes somewhere on the period."""


class GammaNotSimple(UrnflowError):
    """Some eigenvalue of maximal subdominant modulus is not simple."""


class TooFewSurvivors(UrnflowError):
    """Fewer than half of the replicates survived."""


class SampleTooSmall(UrnflowError, ValueError):
    """A statistical test received fewer observations than it needs."""
