"""FastAPI service wrapping the solver core.

The service keeps built bundles (base state, kernel matrices, frozen-L0
factorizations) cached per configuration, so repeated solve requests at
different angular velocities amortize the setup.  Responses carry complete
artifacts (state documents, CSV payloads); clients own persistence.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .. import __version__
from ..basestate import enclosed_mass_check, export_profile_csv
from ..config import build_bundle
from ..diagnostics import integrate_characteristic
from ..errors import ConfigError, RotVlasovError
from ..linearized import operator_diagnostics_csv
from ..persist import (dump_json, orbit_csv, rebuild_state, solution_fields_csv,
                       state_document, state_summary, verify_state)
from ..solver import ContinuationConfig, continuation, newton_solve
from . import schemas


def _solver_cfg(bundle, req_cfg, omega_max, steps) -> ContinuationConfig:
    return ContinuationConfig(
        omega_max=omega_max if omega_max is not None else 0.5 * bundle.omega_cap,
        omega_steps=steps,
        newton_tol=req_cfg.newton_tol,
        max_iters=req_cfg.max_iters,
        use_full_derivative=req_cfg.use_full_derivative,
        r_omega=req_cfg.r_omega,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="rotvlasov",
                  description="Rotating Vlasov-Poisson steady states by "
                              "deformation continuation",
                  version=__version__)

    @app.exception_handler(ConfigError)
    async def _config_error(_: Request, exc: ConfigError):
        return JSONResponse(status_code=400,
                            content={"code": "config-error", "message": str(exc)})

    @app.exception_handler(RequestValidationError)
    async def _validation_error(_: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content={"code": "config-error", "message": str(exc)})

    @app.exception_handler(RotVlasovError)
    async def _solver_error(_: Request, exc: RotVlasovError):
        return JSONResponse(status_code=422,
                            content={"code": "solver-failure", "message": str(exc)})

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/basestate", response_model=schemas.BasestateResponse)
    def basestate(req: schemas.BasestateRequest):
        bundle = build_bundle(req.config.to_config())
        p = bundle.profile
        summary = {
            "k": p.k, "M": p.M, "E0": p.E0, "E1": p.E1, "C_lb": p.C_lb,
            "U0_at_1": float(p.U0[int((p.nodes == 1.0).argmax())]),
            "omega_cap": bundle.omega_cap,
            "mass_equation_residual": enclosed_mass_check(p),
        }
        return schemas.BasestateResponse(
            summary=summary,
            profile_csv=export_profile_csv(p),
            operators_csv=operator_diagnostics_csv(bundle.ops),
        )

    @app.post("/solve", response_model=schemas.SolveResponse)
    def solve(req: schemas.SolveRequest):
        cfg = req.config.to_config()
        bundle = build_bundle(cfg)
        ccfg = _solver_cfg(bundle, req.config, abs(req.omega), 1)
        from ..deformation import DeformationField
        result = newton_solve(bundle.ctx, bundle.ops, req.omega,
                              DeformationField.zero(bundle.space), ccfg)
        state = bundle.ctx.reconstruct_solution(req.omega, result.zeta)
        doc = state_document(state, cfg, solver_info={
            "iterations": result.iterations, "residuals": result.residuals})
        return schemas.SolveResponse(summary=state_summary(state), state=doc,
                                     fields_csv=solution_fields_csv(state))

    @app.post("/continuation", response_model=schemas.ContinuationResponse)
    def run_continuation(req: schemas.ContinuationRequest):
        cfg = req.config.to_config()
        bundle = build_bundle(cfg)
        ccfg = _solver_cfg(bundle, req.config, req.omega_max, req.steps)
        states, manifest = continuation(bundle.ctx, bundle.ops, ccfg)
        docs = [state_document(s, cfg, solver_info={
            "iterations": s.diagnostics["newton_iterations"],
            "residuals": s.diagnostics["newton_residuals"]}) for s in states]
        return schemas.ContinuationResponse(manifest=manifest, states=docs)

    @app.post("/verify", response_model=schemas.VerifyResponse)
    def verify(req: schemas.VerifyRequest):
        report = verify_state(req.state)
        return schemas.VerifyResponse(ok=report["ok"], report=report)

    @app.post("/orbit", response_model=schemas.OrbitResponse)
    def orbit(req: schemas.OrbitRequest):
        bundle, state = rebuild_state(req.state)
        tol = req.tol if req.tol is not None else bundle.config.orbit_tol
        sample = integrate_characteristic(state, req.x0, req.v0,
                                          t_end=req.t_end, tol=tol)
        summary = {
            "omega": state.omega,
            "e_j_drift": sample.e_j_drift,
            "f_drift": sample.f_drift,
            "max_radius": sample.max_radius,
            "escaped": sample.escaped,
        }
        return schemas.OrbitResponse(summary=summary, orbit_csv=orbit_csv(sample))

    return app
