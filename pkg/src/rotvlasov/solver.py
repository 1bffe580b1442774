"""Chord-Newton iteration and natural continuation in the angular velocity.

The chord step freezes the derivative at the non-rotating state, mirroring
the implicit-function-theorem construction: zeta <- zeta - L0^{-1} T(omega,
zeta).  The L0 factorizations are assembled once and reused across every
omega step.  An optional full-derivative path solves the Newton system with
preconditioned GMRES for robustness near the cap.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .deformation import DEFAULT_R_OMEGA, DeformationField
from .errors import AdmissibilityLost, ConfigError, NoConvergence
from .linearized import ModeOperator, apply_dT, solve_L0
from .operator import OperatorContext, SolutionState


@dataclass(frozen=True)
class ContinuationConfig:
    """Knobs of the omega march; omega_max is capped at sqrt(E1)/4."""

    omega_max: float
    omega_steps: int
    newton_tol: float = 1e-9
    max_iters: int = 30
    use_full_derivative: bool = False
    r_omega: float = DEFAULT_R_OMEGA

    def __post_init__(self):
        if self.omega_max < 0.0 or self.omega_steps < 1:
            raise ConfigError("omega_max must be >= 0 and omega_steps >= 1")
        if self.newton_tol <= 0.0 or self.max_iters < 1:
            raise ConfigError("tolerances and iteration budget must be positive")


@dataclass
class NewtonResult:
    zeta: DeformationField
    residuals: list = field(default_factory=list)
    iterations: int = 0

    @property
    def converged(self) -> bool:
        return bool(self.residuals)


def _full_newton_step(ctx: OperatorContext, ops: dict[int, ModeOperator],
                      omega: float, z: DeformationField, T) -> DeformationField:
    """Solve dT(omega, z) step = T by GMRES preconditioned with L0^{-1}."""
    from .deformation import YField
    shape = z.curves.shape

    def matvec(v):
        lam = DeformationField(ctx.space, v.reshape(shape))
        return apply_dT(ctx, omega, z, lam).curves.ravel()

    def precond(v):
        g = YField(ctx.space, v.reshape(shape))
        return solve_L0(ops, ctx, g).curves.ravel()

    N = z.curves.size
    A = LinearOperator((N, N), matvec=matvec)
    M = LinearOperator((N, N), matvec=precond)
    x0 = solve_L0(ops, ctx, T).curves.ravel()
    sol, info = gmres(A, T.curves.ravel(), x0=x0, M=M, rtol=1e-10, maxiter=50)
    if info != 0:
        raise NoConvergence(f"full-derivative GMRES stalled (info={info})")
    return DeformationField(ctx.space, sol.reshape(shape))


def newton_solve(ctx: OperatorContext, ops: dict[int, ModeOperator],
                 omega: float, z_init: DeformationField,
                 cfg: ContinuationConfig) -> NewtonResult:
    """Iterate the chord map at fixed omega until the Y-residual is small.

    Raises NoConvergence when the budget runs out and AdmissibilityLost when
    the iterate leaves the admissible ball (the empirical omega_1 signal).
    """
    if not z_init.admissible(cfg.r_omega):
        raise AdmissibilityLost("initial deformation outside the admissible ball")
    z = z_init
    residuals: list[float] = []
    for it in range(cfg.max_iters + 1):
        T = ctx.T_eval(omega, z)
        res = T.y_norm
        residuals.append(res)
        if res < cfg.newton_tol:
            return NewtonResult(z, residuals, it)
        if it == cfg.max_iters:
            break
        step = (_full_newton_step(ctx, ops, omega, z, T)
                if cfg.use_full_derivative else solve_L0(ops, ctx, T))
        z = z - step
        if not z.admissible(cfg.r_omega):
            raise AdmissibilityLost(
                f"|zeta|_X = {z.x_norm:.4g} >= r_Omega = {cfg.r_omega} "
                f"at omega = {omega:.6g}")
    raise NoConvergence(
        f"chord iteration did not reach {cfg.newton_tol:g} within "
        f"{cfg.max_iters} steps at omega = {omega:.6g}", residuals)


def continuation(ctx: OperatorContext, ops: dict[int, ModeOperator],
                 cfg: ContinuationConfig):
    """March omega from 0 to omega_max, warm-starting each solve.

    Returns (states, manifest).  Stops early on solver failure and reports
    the last converged omega; the initial guess for each step scales the
    previous deformation by the leading omega^2 response.
    """
    if cfg.omega_max > ctx.omega_cap:
        raise ConfigError(f"omega_max {cfg.omega_max:.6g} exceeds the hard cap "
                          f"sqrt(E1)/4 = {ctx.omega_cap:.6g}")
    omegas = np.linspace(0.0, cfg.omega_max, cfg.omega_steps + 1)
    states: list[SolutionState] = []
    entries = []
    z = DeformationField.zero(ctx.space)
    stopped = None
    for i, omega in enumerate(omegas):
        if i > 0 and omegas[i - 1] > 0.0:
            z = z.scaled((omega / omegas[i - 1]) ** 2)
        try:
            result = newton_solve(ctx, ops, float(omega), z, cfg)
        except (NoConvergence, AdmissibilityLost) as exc:
            stopped = {"omega": float(omega), "error": type(exc).__name__,
                       "message": str(exc)}
            break
        z = result.zeta
        state = ctx.reconstruct_solution(float(omega), z)
        state.diagnostics["newton_iterations"] = result.iterations
        state.diagnostics["newton_residuals"] = result.residuals
        states.append(state)
        entries.append({
            "omega": float(omega),
            "iterations": result.iterations,
            "residual_Y": result.residuals[-1],
            "zeta_x_norm": z.x_norm,
            "C": state.C,
            "rho_mode_amplitudes": state.diagnostics["rho_mode_amplitudes"],
        })
    manifest = {
        "omega_max": cfg.omega_max,
        "omega_steps": cfg.omega_steps,
        "newton_tol": cfg.newton_tol,
        "max_iters": cfg.max_iters,
        "use_full_derivative": cfg.use_full_derivative,
        "omega_cap": ctx.omega_cap,
        "steps": entries,
        "last_good_omega": entries[-1]["omega"] if entries else None,
        "stopped_early": stopped,
    }
    return states, manifest


def refine_steps(cfg: ContinuationConfig, factor: int = 2) -> ContinuationConfig:
    """Same march with the omega step divided by `factor`."""
    return replace(cfg, omega_steps=cfg.omega_steps * factor)
