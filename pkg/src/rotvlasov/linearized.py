"""Linearization of T at the non-rotating state and the full derivative.

The frozen derivative factors as L0 = -U0' (id - K) with the compact
integral operator

    (K L)(x) = -(1/U0'(|x|)) int_B3 (1/|x-y| - 1/|y|) rho0'(|y|) L(y) dy,

which is degree-diagonal in the symmetric harmonic basis.  Per degree the
radial kernel is the multipole kernel minus its n = 0 subtraction; the
kernel integration lives on [0, 1] where rho0' is supported.  Nystrom
matrices come from product integration: the integrand is quadratured per
spline interval of the field grid, so the kernel kink at s = r (a grid
node) always sits on an interval boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import io

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import lu_factor, lu_solve

from . import ansatz
from .deformation import DeformationField, YField, invert_rays_batch
from .errors import RotVlasovError
from .operator import OperatorContext
from .quadrature import gauss_legendre, mapped_rule


@dataclass(frozen=True)
class ModeOperator:
    """Dense radial Nystrom matrix for K restricted to one even degree."""

    n: int
    matrix: np.ndarray = field(repr=False)
    norm: float                     # quadrature value of sup_r int |kernel| ds
    cond: float                     # condition number of (id - K_n)
    lu: tuple = field(repr=False)   # LU factorization of (id - K_n)


def _quad_backbone(ctx: OperatorContext, q: int = 8):
    """Per-spline-interval Gauss rule on [0, 1] plus the interpolation matrix.

    Returns (s_nodes, s_weights, E) where E maps field-grid nodal values to
    values of their interpolating spline at the quadrature nodes.
    """
    r = ctx.space.r
    inner = r[r <= 1.0 + 1e-14]
    xg, wg = gauss_legendre(q)
    nodes, weights = [], []
    for a, b in zip(inner[:-1], inner[1:]):
        x, w = mapped_rule(a, b, xg, wg)
        nodes.append(x)
        weights.append(w)
    s = np.concatenate(nodes)
    w = np.concatenate(weights)
    E = CubicSpline(r, np.eye(r.size), axis=0)(s)
    return s, w, E


def assemble_Kn(ctx: OperatorContext, n: int, backbone=None) -> ModeOperator:
    """Product-integration matrix of K_n on the field grid."""
    if n % 2 != 0 or n < 0 or n > ctx.space.basis.n_max:
        raise ValueError(f"degree must be even in [0, {ctx.space.basis.n_max}]")
    if backbone is None:
        backbone = _quad_backbone(ctx)
    s, w, E = backbone
    r = ctx.space.r
    profile = ctx.profile
    rhop = profile.rho0p_at(s)
    # kernel with the s^2 volume factor folded in; n = 0 subtracts s^2/s
    from .harmonics import kernel_k
    kern = kernel_k(n, r[:, None], s[None, :])
    if n == 0:
        kern = kern - s[None, :]
    pref = np.zeros(r.size)
    pos = r > 0.0
    pref[pos] = (-4.0 * np.pi / (2.0 * n + 1.0)) \
        * profile.inv_u0p_over_r(r[pos]) / r[pos]
    rows = (w * rhop)[None, :] * kern
    K = pref[:, None] * (rows @ E)
    norm = float(np.max(np.abs(pref) * ((w * np.abs(rhop)) @ np.abs(kern).T)))
    ident = np.eye(r.size)
    A = ident - K
    cond = float(np.linalg.cond(A, np.inf))
    return ModeOperator(n, K, norm, cond, lu_factor(A))


def build_mode_operators(ctx: OperatorContext) -> dict[int, ModeOperator]:
    backbone = _quad_backbone(ctx)
    return {n: assemble_Kn(ctx, n, backbone)
            for n in range(0, ctx.space.basis.n_max + 1, 2)}


def apply_K(ops: dict[int, ModeOperator], curves: np.ndarray,
            modes) -> np.ndarray:
    """Per-mode matrix application; K is diagonal in degree and order."""
    out = np.empty_like(curves)
    for i, (n, _) in enumerate(modes):
        out[:, i] = ops[n].matrix @ curves[:, i]
    return out


def solve_L0(ops: dict[int, ModeOperator], ctx: OperatorContext,
             g: YField) -> DeformationField:
    """Solve L0 Lambda = g through (id - K_n) Lambda_n = -g_n / U0'.

    The division is regularized by the smooth even function r/U0'(r); g in
    Y makes the quotient an X-field (it vanishes linearly at the center).
    """
    r = ctx.space.r
    phi = ctx.profile.inv_u0p_over_r(r)
    q = np.zeros_like(g.curves)
    pos = r > 0.0
    q[pos] = g.curves[pos] * (phi[pos] / r[pos])[:, None]
    out = np.empty_like(q)
    for i, (n, _) in enumerate(ctx.space.basis.modes):
        try:
            out[:, i] = lu_solve(ops[n].lu, -q[:, i])
        except np.linalg.LinAlgError as exc:  # pragma: no cover
            raise RotVlasovError(f"(id - K_{n}) solve failed") from exc
    return DeformationField(ctx.space, out)


def apply_L0(ops: dict[int, ModeOperator], ctx: OperatorContext,
             lam: DeformationField) -> YField:
    """L0 Lambda = -U0' (Lambda - K Lambda), assembled per mode."""
    r = ctx.space.r
    u0p = ctx.profile.u0p(r)
    klam = apply_K(ops, lam.curves, ctx.space.basis.modes)
    return YField(ctx.space, -u0p[:, None] * (lam.curves - klam))


def apply_dT(ctx: OperatorContext, omega: float, z: DeformationField,
             lam: DeformationField) -> YField:
    """Frechet derivative of T with respect to the deformation.

    Both terms are evaluated by the same mode-space quadrature as T itself:
    the first is the offset potential of the scalar field

        F(y) = d_u h~(omega, r(y), U0(tau)) U0'(tau) / (1 + d_r zeta)
               * Lambda(g^{-1}(y)),

    composed with g; the second is -grad V(g(x)) . x/|x| Lambda(x) with V
    the potential of the pulled-back density.
    """
    space = ctx.space
    basis = space.basis
    data = ctx._assemble(omega, z)
    s_keep = ctx.dgrid.nodes[data.keep]
    tau = data.tau
    u = ctx.profile.u0(tau)
    u0p_tau = ctx.profile.u0p(tau)
    dh = ansatz.tilde_h_du(omega, ctx._cyl_r[data.keep], u, ctx.params)
    if z.is_zero():
        slope = np.zeros_like(tau)
    else:
        x_br, C_ray = space.ray_coefficients(z.curves)
        dC = C_ray[:-1] * np.array([3.0, 2.0, 1.0])[:, None, None]
        slope = space.batch_ray_eval(x_br, dC, tau)
    lam_x, lam_C = space.ray_coefficients(lam.curves)
    lam_tau = space.batch_ray_eval(lam_x, lam_C, tau)
    G = dh * u0p_tau / (1.0 + slope) * lam_tau
    g_samples = np.zeros((ctx.dgrid.n_nodes, basis.units.shape[0]))
    g_samples[data.keep] = G
    g_curves = basis.forward(g_samples)
    pc_g = ctx.msolver.apply(g_curves)
    vg0 = float(pc_g.V[0, 0] * basis.Y[0, 0])

    r = space.r
    rho_g_at = np.zeros((ctx.v_targets.size, basis.n_modes))
    inside = ctx.v_targets <= ctx.dgrid.nodes[-1]
    rho_g_at[inside] = CubicSpline(ctx.dgrid.nodes, g_curves, axis=0)(
        ctx.v_targets[inside])
    if z.is_zero():
        term1 = pc_g.V[: r.size] @ basis.Y - vg0
        vp_g = data.pc.Vp[: r.size] @ basis.Y
    else:
        t = r[:, None] + z.node_samples()
        vq = ctx.potential_interpolant(pc_g, rho_g_at)
        vm = vq(t.ravel()).reshape(r.size, -1, basis.n_modes)
        term1 = np.einsum("ram,ma->ra", vm, basis.Y) - vg0
        vq_rho = ctx.potential_interpolant(data.pc, data.rho_at_targets)
        vpm = vq_rho.derivative()(t.ravel()).reshape(r.size, -1, basis.n_modes)
        vp_g = np.einsum("ram,ma->ra", vpm, basis.Y)
    term2 = -vp_g * lam.node_samples()
    out = basis.forward(term1 + term2)
    out[0, :] = 0.0
    return YField(space, out)


def operator_diagnostics_csv(ops: dict[int, ModeOperator]) -> str:
    """Per-degree operator norms, Lemma-style bounds and condition numbers."""
    buf = io.StringIO()
    buf.write("n,norm_inf,bound_3_over_2n_plus_1,cond_id_minus_K\n")
    for n in sorted(ops):
        op = ops[n]
        buf.write(f"{n},{op.norm!r},{3.0 / (2 * n + 1)!r},{op.cond!r}\n")
    return buf.getvalue()
