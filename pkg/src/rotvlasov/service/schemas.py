"""Pydantic request/response models for the solver service."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field

from ..config import SolverConfig


class ConfigModel(BaseModel):
    """Mirror of SolverConfig; unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid")

    k: float = 1.5
    w_c: float = 1.0
    n_max: int = 8
    nodes_per_panel: int = 64
    density_points: int = 16
    newton_tol: float = 1e-9
    max_iters: int = 30
    use_full_derivative: bool = False
    r_omega: float = 0.125
    orbit_tol: float = 1e-11

    def to_config(self) -> SolverConfig:
        return SolverConfig.from_dict(self.model_dump())


class HealthResponse(BaseModel):
    status: str
    version: str


class BasestateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    config: ConfigModel = Field(default_factory=ConfigModel)


class BasestateResponse(BaseModel):
    summary: dict
    profile_csv: str
    operators_csv: str


class SolveRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    config: ConfigModel = Field(default_factory=ConfigModel)
    omega: float


class SolveResponse(BaseModel):
    summary: dict
    state: dict
    fields_csv: str


class ContinuationRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    config: ConfigModel = Field(default_factory=ConfigModel)
    omega_max: float | None = None    # defaults to half the hard cap
    steps: int = 8


class ContinuationResponse(BaseModel):
    manifest: dict
    states: list[dict]


class VerifyRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    state: dict


class VerifyResponse(BaseModel):
    ok: bool
    report: dict


class OrbitRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    state: dict
    x0: tuple[float, float, float]
    v0: tuple[float, float, float]
    t_end: float = 50.0
    tol: float | None = None


class OrbitResponse(BaseModel):
    summary: dict
    orbit_csv: str


class ErrorBody(BaseModel):
    code: str
    message: str
