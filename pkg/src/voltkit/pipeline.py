"""End-to-end orchestration: analyze, solve and verify pipelines.

The service handlers and the CLI are thin wrappers around these functions;
everything here works on core types only.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .asymptotics import AsymptoticSolution, compute_asymptotics, pretty_expansion
from .characteristic import CharacteristicReport, find_integer_roots
from .errors import (
    HashMismatchError,
    MissingParameterError,
    NoValidConstantsError,
    ParameterMismatchError,
    SolverError,
)
from .model import (
    ProblemSpec,
    SolverConstants,
    ValidationReport,
    canonical_document_bytes,
    estimate_constants,
    functional_weight,
    validate,
)
from .refinement import (
    ContractionReport,
    CorrectionForcing,
    GeneralizedSolution,
    assemble,
    from_mesh,
    solve_correction,
)
from .stepsolver import RunReport, solve_regular
from .verifier import ResidualReport, make_residual_report


class ValidationFailed(SolverError):
    def __init__(self, report: ValidationReport):
        names = ", ".join(c.name for c in report.failures)
        super().__init__(f"validation failed: {names}")
        self.report = report


def problem_hash(spec: ProblemSpec) -> str:
    """Content hash of the normalized problem document."""
    return hashlib.sha256(canonical_document_bytes(spec.to_document())).hexdigest()


# ---------------------------------------------------------------------------
# analyze


@dataclass(frozen=True)
class AnalyzeResult:
    status: str  # ok | validation-failed | no-valid-constants
    validation: ValidationReport
    weight_at_zero: float | None = None
    constants: SolverConstants | None = None
    characteristic: CharacteristicReport | None = None
    paths: tuple[str, ...] = ()
    message: str = ""


def analyze(
    spec: ProblemSpec,
    grid_points: int = 2048,
    target_q: float = 0.5,
    scan_bound: int = 6,
) -> AnalyzeResult:
    """Validation, contraction certificates, characteristic classification
    and the recommended solve path(s)."""
    report = validate(spec, min(grid_points, 512))
    if not report.passed:
        return AnalyzeResult(status="validation-failed", validation=report)
    a0 = abs(float(functional_weight(spec, 0)))
    characteristic = find_integer_roots(spec, scan_bound)
    try:
        constants = estimate_constants(spec, target_q=target_q, grid_points=grid_points)
    except NoValidConstantsError as exc:
        return AnalyzeResult(
            status="no-valid-constants",
            validation=report,
            weight_at_zero=a0,
            characteristic=characteristic,
            message=str(exc),
        )
    paths = []
    if constants.theorem1_ok:
        paths.append("theorem-1")
    if constants.attenuation_ok:
        paths.append("theorem-2")
    return AnalyzeResult(
        status="ok",
        validation=report,
        weight_at_zero=a0,
        constants=constants,
        characteristic=characteristic,
        paths=tuple(paths),
    )


# ---------------------------------------------------------------------------
# solve


@dataclass(frozen=True)
class SolveOptions:
    tol: float = 1e-10
    nodes: int = 17
    order: int | None = None
    params: Mapping[str, float] = field(default_factory=dict)
    target_q: float = 0.5
    grid_points: int = 2048
    strict_params: bool = False
    path: str = "auto"
    v_nodes: int = 257
    t_min: float = 1e-6
    residual_points: int = 17


@dataclass(frozen=True)
class SolveResult:
    solution: GeneralizedSolution
    constants: SolverConstants
    asymptotic: AsymptoticSolution | None
    step_report: RunReport | None
    contraction_report: ContractionReport | None
    residual: ResidualReport
    warnings: tuple[str, ...]

    @property
    def expansion(self) -> str | None:
        return pretty_expansion(self.asymptotic) if self.asymptotic else None


def solve(spec: ProblemSpec, options: SolveOptions = SolveOptions()) -> SolveResult:
    """Full pipeline: validate, certify constants, pick a route, solve,
    then run an automatic residual pass."""
    report = validate(spec)
    if not report.passed:
        raise ValidationFailed(report)
    constants = estimate_constants(
        spec, target_q=options.target_q, grid_points=options.grid_points
    )
    path = options.path
    if path == "auto":
        path = "theorem-1" if constants.theorem1_ok else "theorem-2"
    elif path == "theorem-1" and not constants.theorem1_ok:
        raise NoValidConstantsError("step-method route not certified for this problem")
    elif path == "theorem-2" and not constants.attenuation_ok:
        raise NoValidConstantsError("attenuation route not certified for this problem")
    elif path not in ("theorem-1", "theorem-2"):
        raise ValueError(f"unknown path {path!r}")

    warnings: list[str] = []
    if path == "theorem-1":
        mesh_solution, run_report = solve_regular(
            spec, constants, g=options.nodes, tol=options.tol
        )
        solution = from_mesh(spec, mesh_solution)
        asym = None
        contraction_report = None
        step_report = run_report
    else:
        atten = constants.atten_order
        order = max(atten, options.order or 0)
        asym = compute_asymptotics(spec, order)
        params = dict(options.params)
        unknown = set(params) - set(asym.free_parameters)
        if unknown:
            raise ParameterMismatchError(
                f"unknown parameters: {sorted(unknown)}; "
                f"declared: {list(asym.free_parameters)}"
            )
        missing = [p for p in asym.free_parameters if p not in params]
        if missing:
            if options.strict_params:
                raise MissingParameterError(
                    f"missing bindings for free parameters: {missing}"
                )
            for name in missing:
                params[name] = 0.0
            warnings.append(
                f"free parameters defaulted to 0: {', '.join(missing)}"
            )
        gamma = CorrectionForcing(spec, asym.bind(params), atten, valid_order=order)
        v, contraction_report = solve_correction(
            spec,
            gamma,
            atten,
            constants,
            tol=options.tol,
            node_count=options.v_nodes,
            t_min=options.t_min,
        )
        solution = assemble(spec, asym, params, v, atten)
        step_report = None
    residual = make_residual_report(spec, solution, count=options.residual_points)
    return SolveResult(
        solution=solution,
        constants=constants,
        asymptotic=asym,
        step_report=step_report,
        contraction_report=contraction_report,
        residual=residual,
        warnings=tuple(warnings),
    )


# ---------------------------------------------------------------------------
# verify


@dataclass(frozen=True)
class VerifyResult:
    ok: bool
    threshold: float
    report: ResidualReport


def verify_solution(
    spec: ProblemSpec,
    solution_doc: Mapping,
    threshold: float = 1e-6,
    grid: Sequence[float] | None = None,
    points: int = 17,
) -> VerifyResult:
    """Recompute residuals of a stored solution against its problem."""
    stored = solution_doc.get("problem_sha256")
    if stored is not None and stored != problem_hash(spec):
        raise HashMismatchError(
            "solution was produced from a different problem document"
        )
    solution = GeneralizedSolution.from_document(solution_doc)
    report = make_residual_report(spec, solution, grid=grid, count=points)
    return VerifyResult(ok=report.max_abs <= threshold, threshold=threshold, report=report)
