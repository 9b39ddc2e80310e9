"""voltkit: generalized solutions of first-kind Volterra equations with
piecewise polynomial kernels.

The solution class is u(t) = a*delta(t) + x(t): a Dirac mass at the origin
(forced by f(0) != 0) plus a continuous regular part, constructed either by
the step method with successive approximations or by a log-power expansion
near 0 refined through a damped contraction.
"""

__version__ = "0.1.0"

from .errors import SolverError
from .model import (
    BivariatePolynomial,
    BoundaryFunction,
    Polynomial,
    ProblemSpec,
    SolverConstants,
    estimate_constants,
    parse_problem,
    problem_from_document,
    validate,
)
from .pipeline import SolveOptions, analyze, solve, verify_solution

__all__ = [
    "__version__",
    "SolverError",
    "Polynomial",
    "BivariatePolynomial",
    "BoundaryFunction",
    "ProblemSpec",
    "SolverConstants",
    "parse_problem",
    "problem_from_document",
    "validate",
    "estimate_constants",
    "SolveOptions",
    "analyze",
    "solve",
    "verify_solution",
]
