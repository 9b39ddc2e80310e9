"""FastAPI application wrapping the solver pipeline."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__, pipeline
from ..errors import SolverError
from . import handlers
from .schemas import (
    AnalyzeRequest,
    AnalyzeResponse,
    AsymptoticsRequest,
    AsymptoticsResponse,
    SolveRequest,
    SolveResponse,
    VerifyRequest,
    VerifyResponse,
)


def create_app() -> FastAPI:
    app = FastAPI(
        title="voltkit",
        version=__version__,
        description=(
            "Generalized solutions u = a*delta + x of first-kind Volterra "
            "equations with piecewise polynomial kernels"
        ),
    )

    @app.exception_handler(SolverError)
    async def solver_error_handler(request: Request, exc: SolverError):
        code = handlers.error_code(exc)
        detail = None
        if isinstance(exc, pipeline.ValidationFailed):
            detail = exc.report.to_json_dict()
        return JSONResponse(
            status_code=handlers.http_status(code),
            content={"code": code, "message": str(exc), "detail": detail},
        )

    @app.get("/health")
    async def health():
        return {"status": "ok", "version": __version__}

    @app.post("/analyze", response_model=AnalyzeResponse)
    async def analyze(request: AnalyzeRequest):
        return handlers.analyze(request)

    @app.post("/asymptotics", response_model=AsymptoticsResponse)
    async def asymptotics(request: AsymptoticsRequest):
        return handlers.asymptotics(request)

    @app.post("/solve", response_model=SolveResponse)
    async def solve(request: SolveRequest):
        return handlers.solve(request)

    @app.post("/verify", response_model=VerifyResponse)
    async def verify(request: VerifyRequest):
        return handlers.verify(request)

    return app


app = create_app()
