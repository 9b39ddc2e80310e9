"""Service handlers: pure functions from request models to response models.

The CLI calls these directly (in-process dispatch) and the FastAPI app
exposes them over HTTP; both share the same error-code mapping.
"""

from __future__ import annotations

from .. import pipeline
from ..asymptotics import compute_asymptotics, pretty_expansion
from ..errors import (
    ContractionFailureError,
    HashMismatchError,
    MissingParameterError,
    NoValidConstantsError,
    ParameterMismatchError,
    ProblemFormatError,
    SolverError,
    WeightExhaustedError,
)
from ..model import problem_from_document, validate
from .schemas import (
    AnalyzeRequest,
    AnalyzeResponse,
    AsymptoticsRequest,
    AsymptoticsResponse,
    ProblemModel,
    SolveRequest,
    SolveResponse,
    VerifyRequest,
    VerifyResponse,
)


def error_code(exc: SolverError) -> str:
    if isinstance(exc, pipeline.ValidationFailed):
        return "validation-failed"
    if isinstance(exc, ProblemFormatError):
        return "problem-format"
    if isinstance(exc, NoValidConstantsError):
        return "no-valid-constants"
    if isinstance(exc, (ContractionFailureError, WeightExhaustedError)):
        return "contraction-failure"
    if isinstance(exc, MissingParameterError):
        return "missing-parameters"
    if isinstance(exc, ParameterMismatchError):
        return "bad-parameters"
    if isinstance(exc, HashMismatchError):
        return "hash-mismatch"
    return "solver-error"


def http_status(code: str) -> int:
    return {
        "problem-format": 400,
        "validation-failed": 422,
        "missing-parameters": 422,
        "bad-parameters": 422,
        "no-valid-constants": 409,
        "contraction-failure": 409,
        "hash-mismatch": 409,
    }.get(code, 400)


def _spec(problem: ProblemModel):
    return problem_from_document(problem.to_document())


def analyze(request: AnalyzeRequest) -> AnalyzeResponse:
    spec = _spec(request.problem)
    result = pipeline.analyze(
        spec,
        grid_points=request.grid_points,
        target_q=request.target_q,
        scan_bound=request.scan_bound,
    )
    return AnalyzeResponse(
        status=result.status,
        validation=result.validation.to_json_dict(),
        weight_at_zero=result.weight_at_zero,
        constants=result.constants.to_json_dict() if result.constants else None,
        characteristic=result.characteristic.to_json_dict()
        if result.characteristic
        else None,
        paths=list(result.paths),
        message=result.message,
    )


def asymptotics(request: AsymptoticsRequest) -> AsymptoticsResponse:
    spec = _spec(request.problem)
    report = validate(spec)
    if not report.passed:
        raise pipeline.ValidationFailed(report)
    asym = compute_asymptotics(spec, request.order)
    return AsymptoticsResponse(
        order=asym.order,
        expansion=pretty_expansion(asym),
        free_parameters=list(asym.free_parameters),
        asymptotic=asym.to_json_dict(),
    )


def solve(request: SolveRequest) -> SolveResponse:
    spec = _spec(request.problem)
    options = pipeline.SolveOptions(
        tol=request.tol,
        nodes=request.nodes,
        order=request.order,
        params=request.params,
        target_q=request.target_q,
        grid_points=request.grid_points,
        strict_params=request.strict_params,
        path=request.path,
        v_nodes=request.v_nodes,
        t_min=request.t_min,
        residual_points=request.residual_points,
    )
    result = pipeline.solve(spec, options)
    sol = result.solution
    run = (
        result.step_report.to_json_dict()
        if result.step_report
        else result.contraction_report.to_json_dict()
    )
    doc = sol.to_document(problem_sha256=pipeline.problem_hash(spec))
    return SolveResponse(
        a=float(sol.a),
        a_exact=doc["a_exact"],
        path=sol.path,
        Nstar=sol.atten_order,
        parameters={k: float(v) for k, v in sorted(sol.parameters.items())},
        horizon=sol.horizon,
        t_split=sol.t_split,
        expansion=result.expansion,
        constants=result.constants.to_json_dict(),
        run=run,
        residual=result.residual.to_json_dict(),
        warnings=list(result.warnings),
        solution=doc,
        samples=[(t, x) for t, x in doc["samples"]],
    )


def verify(request: VerifyRequest) -> VerifyResponse:
    spec = _spec(request.problem)
    result = pipeline.verify_solution(
        spec,
        request.solution,
        threshold=request.threshold,
        grid=request.grid,
        points=request.points,
    )
    return VerifyResponse(
        ok=result.ok,
        threshold=result.threshold,
        max_residual=result.report.max_abs,
        report=result.report.to_json_dict(),
    )
