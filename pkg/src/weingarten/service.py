"""HTTP service wrapping the solver pipeline.

The request body of /solve and /check is exactly the run configuration
schema (unknown keys rejected -> 422).  Artifacts come back inline as text
blobs; the service itself never touches the filesystem, so deployments can
run it read-only.  Serve with

    uvicorn weingarten.service:app
"""

from __future__ import annotations

from fastapi import FastAPI
from pydantic import BaseModel

from . import __version__, pipeline
from .config import RunConfig

__all__ = ["app"]


class HealthResponse(BaseModel):
    status: str
    version: str


class StepModel(BaseModel):
    family: str
    parameter: float
    delta: float
    newton_iterations: int
    residual: float
    accepted: bool
    message: str = ""
    admissible: bool = False
    comparison_margin: float = 0.0


class ArtifactModel(BaseModel):
    name: str
    content: str


class SolveResponse(BaseModel):
    status: str
    exit_code: int
    messages: list[str]
    history: list[StepModel]
    report: str | None = None
    artifacts: list[ArtifactModel]


class CheckResponse(BaseModel):
    status: str
    exit_code: int
    k0: float
    psi_min: float | None
    psi_max: float | None
    serrin_passed: bool
    serrin_message: str
    subsolution_admissible: bool
    kappa_min: float | None
    kappa_max: float | None
    messages: list[str]


def _finite_or_none(x: float) -> float | None:
    import math
    return float(x) if math.isfinite(x) else None


app = FastAPI(
    title="weingarten",
    version=__version__,
    description="Strictly convex caps with prescribed Weingarten curvature",
)


@app.get("/health", response_model=HealthResponse)
def health() -> HealthResponse:
    return HealthResponse(status="ok", version=__version__)


@app.post("/check", response_model=CheckResponse)
def check(cfg: RunConfig) -> CheckResponse:
    result = pipeline.check(cfg)
    return CheckResponse(
        status=result.status, exit_code=result.exit_code, k0=result.k0,
        psi_min=_finite_or_none(result.psi_min), psi_max=_finite_or_none(result.psi_max),
        serrin_passed=result.serrin_passed, serrin_message=result.serrin_message,
        subsolution_admissible=result.subsolution_admissible,
        kappa_min=_finite_or_none(result.kappa_min),
        kappa_max=_finite_or_none(result.kappa_max),
        messages=result.messages,
    )


@app.post("/solve", response_model=SolveResponse)
def solve(cfg: RunConfig) -> SolveResponse:
    result = pipeline.run(cfg)
    return SolveResponse(
        status=result.status, exit_code=result.exit_code, messages=result.messages,
        history=[StepModel(family=h.family, parameter=h.parameter, delta=h.delta,
                           newton_iterations=h.newton_iterations, residual=h.residual,
                           accepted=h.accepted, message=h.message,
                           admissible=h.admissible,
                           comparison_margin=h.comparison_margin)
                 for h in result.history],
        report=result.report,
        artifacts=[ArtifactModel(name=name, content=content)
                   for name, content in sorted(result.artifacts.items())],
    )
