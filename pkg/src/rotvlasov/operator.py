"""The nonlinear operator T and reconstruction of full solution triples.

T(omega, zeta)(x) = U0(|x|) - V(g_zeta(x)) - U0(0) + V(0), where V is the
Newtonian potential of the pulled-back density

    rho_zeta(y) = h~(omega, r(y), U0(|g_zeta^{-1}(y)|)),

so zeros of T are exactly the rotating steady states U = U0 o g_zeta^{-1}.
All operator algebra runs in mode space over fixed quadrature grids, which
keeps the discrete T smooth in zeta and bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline, PPoly
from scipy.optimize import brentq

from . import ansatz
from .basestate import RadialProfile
from .deformation import (DEFAULT_R_OMEGA, DeformationField, FieldSpace,
                          YField, invert_along_ray, invert_rays_batch)
from .errors import ConfigError, ConsistencyError, MaxPrincipleViolation
from .harmonics import MultipoleSolver, SymmetryBasis
from .quadrature import RadialGrid, gauss_lobatto, mapped_rule, quintic_hermite

#: density quadrature panels on [0, 3]; the thin panel [1.0, 1.04] brackets
#: the free boundary for every omega below the hard cap, and panel widths
#: keep the per-panel polynomial interpolant of the density near machine
#: precision (the split re-quadrature leans on it)
DENSITY_EDGES = (0.0, 0.2, 0.4, 0.6, 0.8, 0.92, 1.0, 1.04, 1.2, 1.6, 2.0, 2.5, 3.0)
DENSITY_POINTS = 16

#: extension of the potential-curve targets beyond the field grid, so that
#: V(g(x)) stays interpolatory for |x| = 4 and admissible zeta
V_EXTENSION = (4.0, 4.6)
V_EXTENSION_POINTS = 9


def default_density_grid() -> RadialGrid:
    return RadialGrid.build(DENSITY_EDGES, DENSITY_POINTS, kind="gauss")


@dataclass
class DensityField:
    """Symmetric density over the density quadrature grid on [0, 3]."""

    basis: SymmetryBasis
    grid: RadialGrid
    curves: np.ndarray          # (N_s, n_modes)
    samples: np.ndarray = field(repr=False, default=None)  # (N_s, A) raw values

    def eval_points(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(points)
        r = np.linalg.norm(pts, axis=1)
        out = np.zeros(pts.shape[0])
        inside = (r > 0.0) & (r <= self.grid.nodes[-1])
        if np.any(inside):
            spl = CubicSpline(self.grid.nodes, self.curves, axis=0)
            units = pts[inside] / r[inside, None]
            Y = self.basis.eval_at(units)
            out[inside] = np.einsum("nm,mn->n", spl(r[inside]), Y)
        center = r == 0.0
        if np.any(center):
            spl0 = CubicSpline(self.grid.nodes, self.curves[:, 0])
            out[center] = spl0(0.0) * self.basis.Y[0, 0]
        return out

    def mode_amplitudes(self) -> dict:
        return {f"{n},{m}": float(np.max(np.abs(self.curves[:, i])))
                for i, (n, m) in enumerate(self.basis.modes)}


def _curvature_curves(degrees: np.ndarray, targets: np.ndarray, V: np.ndarray,
                      Vp: np.ndarray, rho_at: np.ndarray) -> np.ndarray:
    """V'' from the per-degree radial Poisson identity.

    V'' = 4 pi rho_n - (2/r) V' + n(n+1) V / r^2, with the r -> 0 limits
    (4 pi / 3) rho_n(0) for n = 0 and 0 for n >= 2.
    """
    Vpp = np.empty_like(V)
    r = targets
    pos = r > 0.0
    rp = r[pos, None]
    Vpp[pos] = (4.0 * np.pi * rho_at[pos] - 2.0 * Vp[pos] / rp
                + degrees[None, :] * (degrees[None, :] + 1) * V[pos] / rp**2)
    Vpp[~pos] = 0.0
    Vpp[~pos, degrees == 0] = 4.0 * np.pi / 3.0 * rho_at[~pos, degrees == 0]
    return Vpp


_quintic = quintic_hermite


class PotentialField:
    """Potential evaluator over all of space: multipole interior curves on
    [0, r_ext] plus the exact exterior continuation from outer moments,
    shifted by the constant C."""

    def __init__(self, basis: SymmetryBasis, targets: np.ndarray,
                 V: np.ndarray, Vp: np.ndarray, moments: np.ndarray, C: float,
                 rho_at_targets: np.ndarray | None = None):
        self.basis = basis
        self.targets = targets
        self.C = C
        self.r_ext = float(targets[-1])
        self.moments = moments
        self._degrees = np.array([n for n, _ in basis.modes])
        if rho_at_targets is None:
            rho_at_targets = np.zeros_like(V)
        vpp = _curvature_curves(self._degrees, targets, V, Vp, rho_at_targets)
        self._v_spl = _quintic(targets, V, Vp, vpp)
        self._vp_spl = self._v_spl.derivative()
        self.V0 = float(V[0, 0] * basis.Y[0, 0])  # targets[0] == 0

    def _exterior_curves(self, r: np.ndarray):
        pref = -4.0 * np.pi / (2.0 * self._degrees + 1.0) * self.moments
        V = pref[None, :] * r[:, None] ** -(self._degrees[None, :] + 1)
        Vp = -(self._degrees[None, :] + 1) * V / r[:, None]
        return V, Vp

    def u(self, points: np.ndarray) -> np.ndarray:
        """U(x) = V(x) + C at arbitrary points (N, 3)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.linalg.norm(pts, axis=1)
        out = np.full(pts.shape[0], self.V0 + self.C)
        pos = r > 0.0
        if np.any(pos):
            units = pts[pos] / r[pos, None]
            Y = self.basis.eval_at(units)
            Vm = np.empty((pos.sum(), self.basis.n_modes))
            rin = r[pos] <= self.r_ext
            if np.any(rin):
                Vm[rin] = self._v_spl(r[pos][rin])
            if np.any(~rin):
                Vm[~rin] = self._exterior_curves(r[pos][~rin])[0]
            out[pos] = np.einsum("nm,mn->n", Vm, Y) + self.C
        return out.reshape(np.shape(points)[:-1])

    def grad(self, points: np.ndarray) -> np.ndarray:
        """Cartesian gradient of U at arbitrary points (N, 3)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        r = np.linalg.norm(pts, axis=1)
        out = np.zeros_like(pts)
        pos = r > 0.0
        if not np.any(pos):
            return out.reshape(np.shape(points))
        rp = r[pos]
        units = pts[pos] / rp[:, None]
        Y, dYt, dYp = self.basis.eval_with_gradients(units)
        Vm = np.empty((rp.size, self.basis.n_modes))
        Vpm = np.empty_like(Vm)
        rin = rp <= self.r_ext
        if np.any(rin):
            Vm[rin] = self._v_spl(rp[rin])
            Vpm[rin] = self._vp_spl(rp[rin])
        if np.any(~rin):
            Vm[~rin], Vpm[~rin] = self._exterior_curves(rp[~rin])
        g_r = np.einsum("nm,mn->n", Vpm, Y)
        g_t = np.einsum("nm,mn->n", Vm, dYt) / rp
        g_p = np.einsum("nm,mn->n", Vm, dYp) / rp
        ct = units[:, 2]
        st = np.hypot(units[:, 0], units[:, 1])
        safe = st > 1e-14
        cp = np.where(safe, np.divide(units[:, 0], st, where=safe, out=np.ones_like(st)), 1.0)
        sp = np.where(safe, np.divide(units[:, 1], st, where=safe, out=np.zeros_like(st)), 0.0)
        theta_hat = np.column_stack([ct * cp, ct * sp, -st])
        phi_hat = np.column_stack([-sp, cp, np.zeros_like(sp)])
        out[pos] = (g_r[:, None] * units + g_t[:, None] * theta_hat
                    + g_p[:, None] * phi_hat)
        return out.reshape(np.shape(points))

    def u_on_ray(self, unit, radii) -> np.ndarray:
        pts = np.asarray(radii, dtype=float)[:, None] * np.asarray(unit)[None, :]
        return self.u(pts)


@dataclass
class SolutionState:
    """One continuation point: (omega, zeta, rho, U) plus diagnostics."""

    omega: float
    zeta: DeformationField
    rho: DensityField
    C: float
    potential: PotentialField
    residual: float
    profile: RadialProfile
    params: ansatz.AnsatzParams
    diagnostics: dict


@dataclass
class _TData:
    omega: float
    zeta: DeformationField
    rho: DensityField
    pc: object                  # PotentialCurves
    rho_at_targets: np.ndarray  # density mode curves at the potential targets
    tau: np.ndarray             # pull-back radii on kept shells (N_keep, A)
    keep: np.ndarray            # mask of kept shells
    T: YField | None = None


class OperatorContext:
    """Bundles profile, basis, grids and the multipole solver for T."""

    def __init__(self, profile: RadialProfile, params: ansatz.AnsatzParams,
                 space: FieldSpace, density_grid: RadialGrid | None = None,
                 r_omega: float = DEFAULT_R_OMEGA, q_split: int = 16):
        self.profile = profile
        self.params = params
        self.space = space
        self.dgrid = density_grid if density_grid is not None else default_density_grid()
        self.r_omega = r_omega
        ext_x, _ = gauss_lobatto(V_EXTENSION_POINTS)
        ext_nodes, _ = mapped_rule(V_EXTENSION[0], V_EXTENSION[1], ext_x,
                                   np.zeros(V_EXTENSION_POINTS))
        self.v_targets = np.concatenate([space.r, ext_nodes[1:]])
        self.msolver = MultipoleSolver(space.basis, self.dgrid, self.v_targets,
                                       q_split=q_split)
        self.omega_cap = float(np.sqrt(params.E1) / 4.0)
        # cached geometry
        basis = space.basis
        self._u0_nodes = profile.u0(space.r)
        self._u0_zero = float(profile.u0(np.zeros(1))[0])
        s = self.dgrid.nodes
        units = basis.units
        self._cyl_r = s[:, None] * np.hypot(units[:, 0], units[:, 1])[None, :]

    # -- density pull-back ----------------------------------------------------

    def _support_cut(self, omega: float, z: DeformationField) -> float:
        """Shell radius beyond which rho_zeta provably vanishes."""
        p = self.profile
        level = p.E0 + 4.5 * omega**2
        if level >= p.E0 + p.E1:
            tau_pos = 2.0
        elif level <= p.E0:
            tau_pos = 1.0
        else:
            tau_pos = brentq(lambda t: p.u0(np.asarray([t]))[0] - level, 1.0, 2.0,
                             xtol=1e-12)
        return min(tau_pos * (1.0 + z.x_norm) + 1e-9, self.dgrid.nodes[-1])

    def _pullback(self, omega: float, z: DeformationField):
        """tau = |g^{-1}| on every kept shell/direction pair."""
        s = self.dgrid.nodes
        keep = s < self._support_cut(omega, z)
        return keep, invert_rays_batch(z, s[keep])

    def rho_zeta(self, omega: float, z: DeformationField) -> DensityField:
        """Pulled-back density h~(omega, r(y), U0(|g^{-1}(y)|)) on B3."""
        keep, tau = self._pullback(omega, z)
        samples = np.zeros((self.dgrid.n_nodes, self.space.basis.units.shape[0]))
        u = self.profile.u0(tau)
        samples[keep] = ansatz.tilde_h(omega, self._cyl_r[keep], u, self.params)
        curves = self.space.basis.forward(samples)
        return DensityField(self.space.basis, self.dgrid, curves, samples)

    # -- operator evaluation --------------------------------------------------

    def _assemble(self, omega: float, z: DeformationField) -> _TData:
        if abs(omega) >= self.omega_cap:
            raise ConfigError(f"|omega| must stay below the hard cap "
                              f"sqrt(E1)/4 = {self.omega_cap:.6g}")
        keep, tau = self._pullback(omega, z)
        samples = np.zeros((self.dgrid.n_nodes, self.space.basis.units.shape[0]))
        u = self.profile.u0(tau)
        samples[keep] = ansatz.tilde_h(omega, self._cyl_r[keep], u, self.params)
        rho = DensityField(self.space.basis, self.dgrid,
                           self.space.basis.forward(samples), samples)
        pc = self.msolver.apply(rho.curves)
        rho_at = self.density_at_targets(rho)
        T_samples = self._t_samples(z, pc, rho_at)
        T = YField(self.space, self.space.basis.forward(T_samples))
        return _TData(omega, z, rho, pc, rho_at, tau, keep, T)

    def density_at_targets(self, rho: DensityField) -> np.ndarray:
        """Density mode curves interpolated to the potential targets."""
        out = np.zeros((self.v_targets.size, self.space.basis.n_modes))
        inside = self.v_targets <= self.dgrid.nodes[-1]
        spl = CubicSpline(self.dgrid.nodes, rho.curves, axis=0)
        out[inside] = spl(self.v_targets[inside])
        return out

    def potential_interpolant(self, pc, rho_at_targets: np.ndarray) -> PPoly:
        degrees = np.array([n for n, _ in self.space.basis.modes])
        vpp = _curvature_curves(degrees, self.v_targets, pc.V, pc.Vp,
                                rho_at_targets)
        return _quintic(self.v_targets, pc.V, pc.Vp, vpp)

    def _t_samples(self, z: DeformationField, pc, rho_at) -> np.ndarray:
        basis = self.space.basis
        r = self.space.r
        v0 = float(pc.V[0, 0] * basis.Y[0, 0])
        if z.is_zero():
            v_g = pc.V[: r.size] @ basis.Y
        else:
            v_spl = self.potential_interpolant(pc, rho_at)
            t = r[:, None] + z.node_samples()
            vm = v_spl(t.ravel()).reshape(r.size, -1, basis.n_modes)
            v_g = np.einsum("ram,ma->ra", vm, basis.Y)
        return (self._u0_nodes[:, None] - v_g) - (self._u0_zero - v0)

    def T_eval(self, omega: float, z: DeformationField) -> YField:
        """The operator of the integrated Poisson defect; vanishes at x = 0."""
        return self._assemble(omega, z).T

    # -- reconstruction -------------------------------------------------------

    def reconstruct_solution(self, omega: float, z: DeformationField,
                             data: _TData | None = None,
                             consistency_tol: float = 1e-7) -> SolutionState:
        """Assemble (f, rho, U, C) from a converged deformation and verify
        the maximum-principle condition and the deformed-potential identity."""
        if data is None or data.omega != omega or data.zeta is not z:
            data = self._assemble(omega, z)
        C = self._u0_zero - float(data.pc.V[0, 0] * self.space.basis.Y[0, 0])
        if not C > self.params.E0 + self.params.E1:
            raise MaxPrincipleViolation(
                f"C = {C:.8g} <= E0 + E1 = {self.params.E0 + self.params.E1:.8g}")
        pot = PotentialField(self.space.basis, self.v_targets, data.pc.V,
                             data.pc.Vp, data.pc.moments, C,
                             rho_at_targets=data.rho_at_targets)
        residual = data.T.y_norm
        self._check_consistency(z, pot, consistency_tol)
        supp = self._support_radius(data.rho)
        diagnostics = {
            "omega": omega,
            "residual_Y": residual,
            "C": C,
            "E0_plus_E1": self.params.E0 + self.params.E1,
            "zeta_x_norm": z.x_norm,
            "support_radius": supp,
            "rho_mode_amplitudes": data.rho.mode_amplitudes(),
        }
        return SolutionState(omega, z, data.rho, C, pot, residual,
                             self.profile, self.params, diagnostics)

    def _support_radius(self, rho: DensityField) -> float:
        nz = np.nonzero(np.any(np.abs(rho.samples) > 0.0, axis=1))[0]
        if nz.size == 0:
            return 0.0
        return float(self.dgrid.nodes[nz[-1]])

    def _check_consistency(self, z: DeformationField, pot: PotentialField,
                           tol: float):
        """U(x) = U0(|g^{-1}(x)|) on B3 (Eq. of the deformed potential)."""
        radii = np.array([0.35, 0.8, 1.4, 2.2, 2.9])
        units = self.space.basis.units[:: max(1, self.space.basis.units.shape[0] // 24)]
        worst = 0.0
        for unit in units:
            tau = invert_along_ray(z, unit, radii) if not z.is_zero() else radii
            lhs = pot.u(radii[:, None] * unit[None, :])
            rhs = self.profile.u0(tau)
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        if worst > tol:
            raise ConsistencyError(
                f"|U - U0 o g^-1| = {worst:.3g} exceeds {tol:.3g} on B3")


def poisson_residual(state: SolutionState, h: float = 0.012,
                     n_dirs: int = 8) -> float:
    """Max |FD Laplacian of U - 4 pi h~(omega, r, U)| over a probe grid.

    Fourth-order five-point stencils per axis; probe radii keep 3h clear of
    the free boundary and of the center.
    """
    rng_radii = np.array([0.15, 0.45, 0.75, 1.3, 1.7, 2.4])
    golden = np.pi * (3.0 - np.sqrt(5.0))
    i = np.arange(n_dirs)
    ct = np.linspace(-0.9, 0.9, n_dirs)
    st = np.sqrt(1.0 - ct**2)
    units = np.column_stack([st * np.cos(golden * i), st * np.sin(golden * i), ct])
    probes = (rng_radii[:, None, None] * units[None, :, :]).reshape(-1, 3)
    pot, params = state.potential, state.params
    stencil = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12.0 * h * h)
    offsets = np.array([-2.0, -1.0, 0.0, 1.0, 2.0]) * h
    lap = np.zeros(probes.shape[0])
    for axis in range(3):
        shift = np.zeros((offsets.size, 3))
        shift[:, axis] = offsets
        vals = np.stack([pot.u(probes + sh[None, :]) for sh in shift])
        lap += stencil @ vals
    u_c = pot.u(probes)
    r_cyl = np.hypot(probes[:, 0], probes[:, 1])
    rhs = 4.0 * np.pi * ansatz.tilde_h(state.omega, r_cyl, u_c, params)
    return float(np.max(np.abs(lap - rhs)))
