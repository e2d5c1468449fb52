"""Exception hierarchy shared by all modules."""


class HolodualError(Exception):
    """Base class for errors raised by this package."""


class DomainError(HolodualError, ValueError):
    """An argument lies outside the domain of the requested function."""


class PoleError(DomainError):
    """Gamma-type function evaluated at a pole."""


class DegenerateCovarianceError(DomainError):
    """Covariance matrix is singular where an invertible one is required."""


class ConvergenceError(HolodualError, ArithmeticError):
    """An iterative method did not reach its tolerance within its budget."""


class SingularityError(HolodualError, ArithmeticError):
    """A point or integration path comes too close to a singular locus."""


class UnreachableTargetError(SingularityError):
    """No admissible straight path reaches the requested target."""


class StepUnderflowError(HolodualError, ArithmeticError):
    """The adaptive ODE step fell below the step-size floor."""


class PfaffianParseError(HolodualError, ValueError):
    """A Pfaffian document could not be parsed."""


class DimensionMismatchError(PfaffianParseError):
    """Declared rank and matrix sizes disagree."""


class MissingPfaffianError(HolodualError, LookupError):
    """No Pfaffian system is available for an activator pair."""


class ClosedFormUnavailable(HolodualError, NotImplementedError):
    """No closed form is known (or implemented) for an activator."""


class RationalOverflowError(HolodualError, OverflowError):
    """Exact rational numbers exceeded the configured bit bound."""


class RankDeficiencyError(HolodualError, ArithmeticError):
    """A least-squares design matrix is rank deficient."""

    def __init__(self, message, nullity):
        super().__init__(message)
        self.nullity = nullity


class CheckFailed(HolodualError, AssertionError):
    """A self-check found values outside their tolerance."""

    def __init__(self, message, deltas):
        super().__init__(message)
        self.deltas = deltas


class SolverError(HolodualError, ArithmeticError):
    """A linear solve failed because the system is numerically singular."""
