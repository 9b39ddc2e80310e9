"""Exception types shared across the solver."""


class SolverError(Exception):
    """Base class for every error raised by this package."""


class ProblemFormatError(SolverError):
    """Problem document violates the input schema or uses unsupported data."""


class DomainError(SolverError):
    """Evaluation requested outside the admissible (t, s) region."""


class SingularDiagonalError(SolverError):
    """The last kernel piece vanishes on the diagonal where it must not."""


class NotCoveredError(SolverError):
    """Input violates a standing assumption of the method (K_1(0,0) = 0)."""


class NoValidConstantsError(SolverError):
    """Neither contraction route admits certified constants for this problem."""


class InvalidBoundaryError(SolverError):
    """Boundary curve is unusable for substitution (slope at 0 not positive)."""


class NonPolynomialDerivativeError(SolverError):
    """Differentiation would leave the log-power representation (1/t term)."""


class DegenerateCharacteristicError(SolverError):
    """Characteristic derivatives vanish up to the hard multiplicity cap."""


class MultiplicityMismatchError(SolverError):
    """Difference-operator data inconsistent with the declared multiplicity."""


class InternalConsistencyError(SolverError):
    """An internal invariant failed (e.g. log-degree bound exceeded)."""


class MissingParameterError(SolverError):
    """Evaluation attempted with an unbound free parameter."""


class ParameterMismatchError(SolverError):
    """Supplied parameter bindings do not match the declared free parameters."""


class HistoryMissingError(SolverError):
    """A perturbed argument fell outside the already-solved history."""


class ContractionFailureError(SolverError):
    """Successive approximations stopped contracting."""

    def __init__(self, message, ratio=None):
        super().__init__(message)
        self.ratio = ratio


class WeightExhaustedError(SolverError):
    """No admissible exponential weight makes the operator a contraction."""


class HashMismatchError(SolverError):
    """Solution document was produced from a different problem document."""
