"""Run configuration: a flat JSON document validated against a strict schema.

Unknown keys are rejected; defaults are filled and documented on the model.
The same model doubles as the request body of the HTTP service.
"""

from __future__ import annotations

import json
import math

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from . import psidsl

__all__ = ["RunConfig", "ConfigError", "load_config", "load_raw"]


class ConfigError(ValueError):
    pass


class RunConfig(BaseModel):
    """Schema of a solve/check run.

    Geometry: ``center``/``radius`` give the enclosing sphere, ``cap_radius``
    (radians) the geodesic radius of the domain around the north pole,
    ``rings``/``sectors`` the resolution.  ``k`` picks the curvature order
    (1 = mean, 2 = Gauss for surfaces).  ``psi`` is an expression in
    nx, ny, nz (see the psidsl grammar).
    """

    model_config = ConfigDict(extra="forbid")

    k: int
    cap_radius: float
    radius: float
    psi: str
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    rings: int = 32
    sectors: int = 64

    newton_tol: float = Field(default=1e-9, gt=0)
    max_newton: int = Field(default=30, ge=1)
    step_initial: float = Field(default=0.1, gt=0, le=1)
    step_min: float = Field(default=1e-4, gt=0)
    step_shrink: float = Field(default=0.5, gt=0, lt=1)
    step_grow: float = Field(default=1.5, ge=1)
    comparison_tol: float = Field(default=1e-10, ge=0)
    jacobian_mode: str = "analytic"
    allow_nonsmooth_psi: bool = False

    mesh_median_tol: float = Field(default=0.02, gt=0)
    mesh_p95_tol: float = Field(default=0.05, gt=0)
    duality_tol: float = Field(default=1e-6, gt=0)
    nm_margin_tol: float = Field(default=1e-8, gt=0)

    out_dir: str = "out"
    export_obj: bool = True
    export_vtk: bool = True

    @field_validator("k")
    @classmethod
    def _k_range(cls, v):
        if not 1 <= v <= 2:
            raise ValueError("k must be 1 or 2 (surfaces in 3-space)")
        return v

    @field_validator("cap_radius")
    @classmethod
    def _cap_range(cls, v):
        if not 0.0 < v < math.pi / 2:
            raise ValueError("cap_radius must lie in (0, pi/2)")
        return v

    @field_validator("rings")
    @classmethod
    def _rings_range(cls, v):
        if v < 4:
            raise ValueError("rings must be >= 4")
        return v

    @field_validator("sectors")
    @classmethod
    def _sectors_range(cls, v):
        if v < 8:
            raise ValueError("sectors must be >= 8")
        return v

    @field_validator("jacobian_mode")
    @classmethod
    def _jacobian_mode_known(cls, v):
        if v not in ("analytic", "fd"):
            raise ValueError("jacobian_mode must be 'analytic' or 'fd'")
        return v

    @field_validator("psi")
    @classmethod
    def _psi_parses(cls, v):
        try:
            psidsl.parse(v)
        except psidsl.PsiSyntaxError as err:
            raise ValueError(f"psi does not parse: {err}") from None
        return v

    @model_validator(mode="after")
    def _sphere_contains_origin(self):
        c = self.center
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if math.sqrt(c[0] ** 2 + c[1] ** 2 + c[2] ** 2) >= self.radius:
            raise ValueError("the chart origin must lie strictly inside the sphere "
                             "(|center| < radius)")
        return self


def load_raw(path) -> dict:
    """Read a JSON config file; errors carry the line/column."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err.msg} "
                          f"(line {err.lineno}, column {err.colno})") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return raw


def load_config(path) -> RunConfig:
    """Load and validate; raises ConfigError naming the offending key."""
    raw = load_raw(path)
    return validate_config(raw)


def validate_config(raw: dict) -> RunConfig:
    from pydantic import ValidationError
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as err:
        parts = []
        for item in err.errors():
            key = ".".join(str(p) for p in item["loc"]) or "<root>"
            parts.append(f"{key}: {item['msg']}")
        raise ConfigError("invalid config: " + "; ".join(parts)) from None
