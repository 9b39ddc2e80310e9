"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field

Coefficient = Union[int, float, str]  # numbers or exact "p/q" strings


class KernelModel(BaseModel):
    model_config = ConfigDict(extra="forbid")
    terms: list[tuple[int, int, Coefficient]]


class ProblemModel(BaseModel):
    """Wire form of a problem document (see README for the file schema)."""

    model_config = ConfigDict(extra="forbid")
    T: Coefficient
    boundaries: list[list[Coefficient]]
    kernels: list[KernelModel]
    f: list[Coefficient]

    def to_document(self) -> dict:
        return {
            "T": self.T,
            "boundaries": [list(b) for b in self.boundaries],
            "kernels": [{"terms": [list(t) for t in k.terms]} for k in self.kernels],
            "f": list(self.f),
        }


class AnalyzeRequest(BaseModel):
    problem: ProblemModel
    grid_points: int = 2048
    target_q: float = 0.5
    scan_bound: int = 6


class AnalyzeResponse(BaseModel):
    status: Literal["ok", "validation-failed", "no-valid-constants"]
    validation: dict
    weight_at_zero: Optional[float] = None
    constants: Optional[dict] = None
    characteristic: Optional[dict] = None
    paths: list[str] = Field(default_factory=list)
    message: str = ""


class AsymptoticsRequest(BaseModel):
    problem: ProblemModel
    order: int = 2


class AsymptoticsResponse(BaseModel):
    order: int
    expansion: str
    free_parameters: list[str]
    asymptotic: dict


class SolveRequest(BaseModel):
    problem: ProblemModel
    tol: float = 1e-10
    nodes: int = 17
    order: Optional[int] = None
    params: dict[str, float] = Field(default_factory=dict)
    target_q: float = 0.5
    grid_points: int = 2048
    strict_params: bool = False
    path: Literal["auto", "theorem-1", "theorem-2"] = "auto"
    v_nodes: int = 257
    t_min: float = 1e-6
    residual_points: int = 17


class SolveResponse(BaseModel):
    a: float
    a_exact: str
    path: str
    Nstar: int
    parameters: dict[str, float]
    horizon: float
    t_split: float
    expansion: Optional[str] = None
    constants: dict
    run: dict
    residual: dict
    warnings: list[str]
    solution: dict
    samples: list[tuple[float, float]]


class VerifyRequest(BaseModel):
    problem: ProblemModel
    solution: dict
    threshold: float = 1e-6
    points: int = 17
    grid: Optional[list[float]] = None


class VerifyResponse(BaseModel):
    ok: bool
    threshold: float
    max_residual: float
    report: dict


class ErrorBody(BaseModel):
    code: str
    message: str
    detail: Optional[dict] = None
