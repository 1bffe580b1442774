"""Real spherical harmonics restricted to the mirror-symmetry set S.

Invariance under the three coordinate-plane reflections forces even degree,
even order and cosine type, so the basis for degree n has n/2 + 1 members.
Transforms use Gauss-Legendre nodes in cos(theta) and a uniform azimuthal
grid, exact for band-limited products up to the quadrature degree.

The module also hosts the multipole solver for the Newtonian potential of a
ball-supported density: per-degree radial kernels min(r,s)^n / max(r,s)^(n+1)
integrated by panel quadrature, re-split at s = r to keep spectral accuracy
across the kernel kink.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .quadrature import (RadialGrid, barycentric_matrix, gauss_legendre,
                         mapped_rule)


def legendre_P(n: int, t):
    """Legendre polynomial P_n(t) on [-1, 1] by the three-term recurrence."""
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) > 1.0 + 1e-14):
        raise ValueError("argument outside [-1, 1]")
    if n == 0:
        return np.ones_like(t)
    p_prev = np.ones_like(t)
    p = t.copy()
    for j in range(2, n + 1):
        p, p_prev = ((2 * j - 1) * t * p - (j - 1) * p_prev) / j, p
    return p


def _norm_plm_tables(n_max: int, x: np.ndarray):
    """Orthonormalized associated Legendre values and theta-derivatives.

    Returns (P, dP) with shape (n_max+1, n_max+1, len(x)), normalized so
    that int_0^pi P[n,m](cos t)^2 sin t dt = 1.  dP is the derivative with
    respect to theta; rows with sin(theta) = 0 get zero derivatives, which
    is exact for the even orders used here.
    """
    x = np.asarray(x, dtype=float)
    st = np.sqrt(np.maximum(1.0 - x * x, 0.0))
    P = np.zeros((n_max + 1, n_max + 1, x.size))
    P[0, 0] = 1.0 / np.sqrt(2.0)
    for m in range(1, n_max + 1):
        P[m, m] = st * np.sqrt((2 * m + 1) / (2.0 * m)) * P[m - 1, m - 1]
    for m in range(n_max):
        P[m + 1, m] = x * np.sqrt(2 * m + 3.0) * P[m, m]
        for n in range(m + 2, n_max + 1):
            a = np.sqrt((4.0 * n * n - 1.0) / (n * n - m * m))
            b = np.sqrt(((n - 1.0) ** 2 - m * m) / (4.0 * (n - 1.0) ** 2 - 1.0))
            P[n, m] = a * (x * P[n - 1, m] - b * P[n - 2, m])
    dP = np.zeros_like(P)
    safe = st > 1e-12
    inv_st = np.zeros_like(st)
    inv_st[safe] = 1.0 / st[safe]
    for n in range(n_max + 1):
        for m in range(n + 1):
            if n == m:
                dP[n, m] = n * x * P[n, m] * inv_st
            else:
                e = np.sqrt((n * n - m * m) * (2.0 * n + 1.0) / (2.0 * n - 1.0))
                dP[n, m] = (n * x * P[n, m] - e * P[n - 1, m]) * inv_st
    return P, dP


def _angular_pieces(units: np.ndarray, n_max: int):
    """cos(theta), azimuthal cos/sin tables and Legendre tables for points.

    units: (N, 3) unit vectors.  Returns (P, dP, cosm, sinm, inv_st) where
    cosm/sinm have shape (n_max+1, N).
    """
    u = np.asarray(units, dtype=float)
    ct = np.clip(u[:, 2], -1.0, 1.0)
    st = np.hypot(u[:, 0], u[:, 1])
    safe = st > 1e-14
    cphi = np.where(safe, np.divide(u[:, 0], st, where=safe, out=np.ones_like(st)), 1.0)
    sphi = np.where(safe, np.divide(u[:, 1], st, where=safe, out=np.zeros_like(st)), 0.0)
    cosm = np.ones((n_max + 1, u.shape[0]))
    sinm = np.zeros((n_max + 1, u.shape[0]))
    if n_max >= 1:
        cosm[1], sinm[1] = cphi, sphi
        for m in range(2, n_max + 1):
            cosm[m] = 2.0 * cphi * cosm[m - 1] - cosm[m - 2]
            sinm[m] = 2.0 * cphi * sinm[m - 1] - sinm[m - 2]
    P, dP = _norm_plm_tables(n_max, ct)
    inv_st = np.zeros_like(st)
    inv_st[safe] = 1.0 / st[safe]
    return P, dP, cosm, sinm, inv_st


_SQRT_2PI = np.sqrt(2.0 * np.pi)
_SQRT_PI = np.sqrt(np.pi)


@dataclass(frozen=True)
class SymmetryBasis:
    """Orthonormal real cosine harmonics with n, m even (the S-invariant set)."""

    n_max: int
    n_theta: int
    n_phi: int
    modes: tuple = field(repr=False)
    theta_x: np.ndarray = field(repr=False)      # Gauss-Legendre nodes in cos(theta)
    theta_w: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    units: np.ndarray = field(repr=False)        # (n_theta*n_phi, 3)
    Y: np.ndarray = field(repr=False)            # (n_modes, A) basis values on the grid
    dYdtheta: np.ndarray = field(repr=False)
    dYdphi_over_st: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)      # (A,) quadrature weights on S^2
    theta_hat: np.ndarray = field(repr=False)    # (A, 3)
    phi_hat: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, n_max: int = 8, n_theta: int | None = None,
              n_phi: int | None = None) -> "SymmetryBasis":
        if n_max % 2 != 0 or n_max < 0:
            raise ValueError("n_max must be a non-negative even integer")
        n_theta = n_theta if n_theta is not None else n_max + 2
        n_phi = n_phi if n_phi is not None else 2 * n_max + 2
        if n_theta < n_max + 1 or n_phi < 2 * n_max + 2:
            raise ValueError("angular grid too small for exact degree-2*n_max products")
        modes = tuple((n, m) for n in range(0, n_max + 1, 2)
                      for m in range(0, n + 1, 2))
        x, w = gauss_legendre(n_theta)
        phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
        st = np.sqrt(1.0 - x**2)
        ct_g, cp_g = np.meshgrid(x, np.cos(phi), indexing="ij")
        st_g, sp_g = np.meshgrid(st, np.sin(phi), indexing="ij")
        units = np.column_stack([(st_g * cp_g).ravel(), (st_g * sp_g).ravel(),
                                 ct_g.ravel()])
        weights = (w[:, None] * (2.0 * np.pi / n_phi) * np.ones(n_phi)[None, :]).ravel()
        Y, dYt, dYp = cls._tables(modes, n_max, units)
        theta_hat = np.column_stack([(ct_g * cp_g).ravel(), (ct_g * sp_g).ravel(),
                                     -st_g.ravel()])
        phi_hat = np.column_stack([-sp_g.ravel(), cp_g.ravel(),
                                   np.zeros(units.shape[0])])
        return cls(n_max, n_theta, n_phi, modes, x, w, phi, units,
                   Y, dYt, dYp, weights, theta_hat, phi_hat)

    @staticmethod
    def _tables(modes, n_max, units):
        P, dP, cosm, sinm, inv_st = _angular_pieces(units, n_max)
        n_pts = units.shape[0]
        Y = np.zeros((len(modes), n_pts))
        dYt = np.zeros_like(Y)
        dYp = np.zeros_like(Y)
        for i, (n, m) in enumerate(modes):
            az = 1.0 / _SQRT_2PI if m == 0 else cosm[m] / _SQRT_PI
            Y[i] = P[n, m] * az
            dYt[i] = dP[n, m] * az
            if m > 0:
                dYp[i] = P[n, m] * (-m * sinm[m] / _SQRT_PI) * inv_st
        return Y, dYt, dYp

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    def mode_index(self, n: int, m: int) -> int:
        try:
            return self.modes.index((n, m))
        except ValueError:
            raise KeyError(f"mode ({n}, {m}) not in the S-restricted basis") from None

    def eval_basis(self, n: int, m: int, xi) -> float:
        """Single-mode value at a unit vector (tolerance 1e-12 on |xi|)."""
        i = self.mode_index(n, m)
        xi = np.asarray(xi, dtype=float).reshape(1, 3)
        if abs(np.linalg.norm(xi) - 1.0) > 1e-12:
            raise ValueError("input is not a unit vector")
        return float(self.eval_at(xi)[i, 0])

    def eval_at(self, units) -> np.ndarray:
        """Basis values at arbitrary unit vectors; shape (n_modes, N)."""
        Y, _, _ = self._tables(self.modes, self.n_max, np.atleast_2d(units))
        return Y

    def eval_with_gradients(self, units):
        """(Y, dY/dtheta, dY/dphi / sin(theta)) at arbitrary unit vectors."""
        return self._tables(self.modes, self.n_max, np.atleast_2d(units))

    def forward(self, samples: np.ndarray) -> np.ndarray:
        """Surface-integral coefficients of grid samples.

        samples: (..., A) values on the angular grid; returns (..., n_modes).
        """
        return np.asarray(samples) @ (self.Y * self.weights).T

    def inverse(self, coeffs: np.ndarray) -> np.ndarray:
        """Grid samples of a coefficient vector; shape (..., A)."""
        return np.asarray(coeffs) @ self.Y

    def gram_matrix(self) -> np.ndarray:
        return (self.Y * self.weights) @ self.Y.T


def full_degree_matrix(n: int, units) -> np.ndarray:
    """The full orthonormal degree-n set (cos and sin types) at unit vectors.

    Only used diagnostically (addition theorem, symmetrization dimension
    counts); shape (2n+1, N).
    """
    units = np.atleast_2d(units)
    P, _, cosm, sinm, _ = _angular_pieces(units, n)
    rows = [P[n, 0] / _SQRT_2PI]
    for m in range(1, n + 1):
        rows.append(P[n, m] * cosm[m] / _SQRT_PI)
        rows.append(P[n, m] * sinm[m] / _SQRT_PI)
    return np.vstack(rows)


# -- multipole machinery ------------------------------------------------------

def kernel_k(n: int, r, s):
    """s^2 * min(r,s)^n / max(r,s)^(n+1), computed through stable ratios."""
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    mx = np.maximum(r, s)
    mn = np.minimum(r, s)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(mx > 0.0, mn / mx, 0.0)
    base = np.where(mx > 0.0, s * s / mx, 0.0)
    return base * ratio**n if n > 0 else base


def kernel_kp(n: int, r, s):
    """s^2 * d/dr [min^n/max^(n+1)]; vanishes identically for n = 0, s > r."""
    r = np.asarray(r, dtype=float)
    s = np.asarray(s, dtype=float)
    out = np.zeros(np.broadcast(r, s).shape)
    inner = s < r        # kernel s^n / r^(n+1)
    outer = s > r
    if np.any(inner):
        ri, si = np.broadcast_arrays(r, s)
        rr, ss = ri[inner], si[inner]
        out[inner] = -(n + 1.0) * (ss / rr) ** n * ss * ss / rr**2
    if n >= 1 and np.any(outer):
        ri, si = np.broadcast_arrays(r, s)
        rr, ss = ri[outer], si[outer]
        out[outer] = n * (rr / ss) ** (n - 1) * 1.0
    return out


@dataclass(frozen=True)
class PotentialCurves:
    """Per-mode potential and radial-derivative curves plus outer moments."""

    targets: np.ndarray
    V: np.ndarray          # (n_targets, n_modes)
    Vp: np.ndarray
    moments: np.ndarray    # (n_modes,) int s^(n+2) rho_nm ds


class MultipoleSolver:
    """Precomputed kernel matrices mapping density mode curves to potentials.

    Targets are fixed radii; each target strictly inside a density panel
    gets its panel contribution re-quadratured on [a, r] and [r, b] through
    the panel's polynomial interpolant, so the kernel kink never sits inside
    an integration interval.
    """

    def __init__(self, basis: SymmetryBasis, density_grid: RadialGrid,
                 targets: np.ndarray, q_split: int = 16):
        self.basis = basis
        self.dgrid = density_grid
        self.targets = np.asarray(targets, dtype=float)
        self.degrees = sorted({n for n, _ in basis.modes})
        self._mode_cols = {deg: np.array([i for i, (n, _) in enumerate(basis.modes)
                                          if n == deg]) for deg in self.degrees}
        xq, wq = gauss_legendre(q_split)
        s = density_grid.nodes
        n_t, n_s = self.targets.size, s.size
        self.W = {n: np.zeros((n_t, n_s)) for n in self.degrees}
        self.Wp = {n: np.zeros((n_t, n_s)) for n in self.degrees}
        edges = np.asarray(density_grid.edges)
        for j, r in enumerate(self.targets):
            owner = None
            if density_grid.edges[0] < r < density_grid.edges[-1] and \
                    np.min(np.abs(edges - r)) > 1e-13:
                owner = density_grid.panel_of(r)
            for n in self.degrees:
                self.W[n][j] = density_grid.weights * kernel_k(n, r, s)
                self.Wp[n][j] = density_grid.weights * kernel_kp(n, r, s)
            if owner is None:
                continue
            panel = density_grid.panels[owner]
            cols = density_grid.panel_node_indices(owner)
            t_lo, w_lo = mapped_rule(panel.a, r, xq, wq)
            t_hi, w_hi = mapped_rule(r, panel.b, xq, wq)
            t_all = np.concatenate([t_lo, t_hi])
            w_all = np.concatenate([w_lo, w_hi])
            B = barycentric_matrix(panel.nodes, panel.bary, t_all)
            for n in self.degrees:
                self.W[n][j, cols] = (w_all * kernel_k(n, r, t_all)) @ B
                self.Wp[n][j, cols] = (w_all * kernel_kp(n, r, t_all)) @ B
        self._moment_w = {n: density_grid.weights * s ** (n + 2)
                          for n in self.degrees}

    def apply(self, rho_curves: np.ndarray) -> PotentialCurves:
        """Potential curves of density mode curves sampled on the density grid."""
        n_t = self.targets.size
        V = np.zeros((n_t, self.basis.n_modes))
        Vp = np.zeros_like(V)
        moments = np.zeros(self.basis.n_modes)
        for n in self.degrees:
            cols = self._mode_cols[n]
            pref = -4.0 * np.pi / (2.0 * n + 1.0)
            V[:, cols] = pref * (self.W[n] @ rho_curves[:, cols])
            Vp[:, cols] = pref * (self.Wp[n] @ rho_curves[:, cols])
            moments[cols] = self._moment_w[n] @ rho_curves[:, cols]
        return PotentialCurves(self.targets, V, Vp, moments)


def newtonian_potential(basis: SymmetryBasis, density_grid: RadialGrid,
                        rho_curves: np.ndarray, targets) -> PotentialCurves:
    """One-shot potential solve; prefer a cached MultipoleSolver in hot loops."""
    return MultipoleSolver(basis, density_grid, np.asarray(targets, float)).apply(rho_curves)
