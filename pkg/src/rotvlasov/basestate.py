"""Non-rotating base state: Emden-type shooting and normalization.

With w := E0 - U0 the radial Poisson equation closed by the polytropic
ansatz reads

    w'' + (2/r) w' = -4 pi c_k w_+^(k+3/2),

integrated outward from a series start until the first zero R of w.  The
scaling symmetry w -> lambda^(2/(k+1/2)) w(lambda r) moves R to 1, which
normalizes the support of rho0 to the unit ball and forces E0 = -M through
the exterior law U0 = -M/r.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .ansatz import AnsatzParams, closure_prefactor
from .errors import ProfileError
from .quadrature import RadialGrid, gauss_legendre, mapped_rule, quintic_hermite

#: default storage grid: Gauss-Lobatto panels split at the support edge (1)
#: and the margin-definition radius (2)
DEFAULT_PANELS = (0.0, 1.0, 2.0, 4.0)
DEFAULT_NODES_PER_PANEL = 64

_SERIES_START = 1e-4


def default_grid(nodes_per_panel: int = DEFAULT_NODES_PER_PANEL) -> RadialGrid:
    return RadialGrid.build(DEFAULT_PANELS, nodes_per_panel, kind="lobatto")


@dataclass(frozen=True)
class EmdenSolution:
    """Raw outward integration of the depth variable w = E0 - U0."""

    k: float
    w_c: float
    R: float                      # first zero of w (support radius)
    sol: object = field(repr=False)  # scipy dense output over [r_start, R]

    def w(self, r):
        rr = np.atleast_1d(np.asarray(r, dtype=float)).ravel()
        out = np.empty_like(rr)
        small = rr < _SERIES_START
        out[small] = self._series(rr[small])
        if np.any(~small):
            out[~small] = self.sol(np.clip(rr[~small], _SERIES_START, self.R))[0]
        return out.reshape(np.shape(r))

    def w_prime(self, r):
        rr = np.atleast_1d(np.asarray(r, dtype=float)).ravel()
        out = np.empty_like(rr)
        small = rr < _SERIES_START
        out[small] = self._series_prime(rr[small])
        if np.any(~small):
            out[~small] = self.sol(np.clip(rr[~small], _SERIES_START, self.R))[1]
        return out.reshape(np.shape(r))

    def _coeffs(self):
        n = self.k + 1.5
        a = 4.0 * np.pi * closure_prefactor(self.k) * self.w_c**n
        b = (4.0 * np.pi * closure_prefactor(self.k))**2 * n * self.w_c ** (2 * n - 1)
        return a, b

    def _series(self, r):
        a, b = self._coeffs()
        return self.w_c - a * r**2 / 6.0 + b * r**4 / 120.0

    def _series_prime(self, r):
        a, b = self._coeffs()
        return -a * r / 3.0 + b * r**3 / 30.0


def solve_emden(k: float, w_c: float, r_max: float | None = None) -> EmdenSolution:
    """Integrate the closed radial Poisson equation to the first zero of w.

    Raises ProfileError if w never crosses zero before r_max, which signals
    non-compact support (cannot occur for k + 3/2 < 5).
    """
    if not (k > 1.0 and w_c > 0.0):
        raise ProfileError(f"need k > 1 and w_c > 0, got k={k}, w_c={w_c}")
    ck = closure_prefactor(k)
    n = k + 1.5
    if r_max is None:
        # generous multiple of the Lane-Emden length scale
        r_max = 200.0 / np.sqrt(4.0 * np.pi * ck * w_c ** (n - 1.0))

    def rhs(r, y):
        w, wp = y
        return [wp, -2.0 * wp / r - 4.0 * np.pi * ck * max(w, 0.0) ** n]

    def crossing(r, y):
        return y[0]

    crossing.terminal = True
    crossing.direction = -1

    raw = EmdenSolution(k, w_c, np.inf, None)
    y0 = [raw._series(np.asarray(_SERIES_START)).item(),
          raw._series_prime(np.asarray(_SERIES_START)).item()]
    sol = solve_ivp(rhs, (_SERIES_START, r_max), y0, method="DOP853",
                    rtol=1e-13, atol=1e-14, dense_output=True, events=crossing)
    if sol.t_events[0].size == 0:
        raise ProfileError(f"w did not cross zero before r_max={r_max}; "
                           "non-compact support?")
    # refine the event location on the dense output
    r_ev = sol.t_events[0][0]
    lo = max(_SERIES_START, 0.999 * r_ev)
    R = brentq(lambda r: sol.sol(r)[0], lo, sol.t[-1], xtol=1e-14, rtol=8.9e-16)
    return EmdenSolution(k, w_c, R, sol.sol)


@dataclass(frozen=True)
class RadialProfile:
    """The normalized base state on a radial storage grid over [0, 4].

    Node arrays hold (U0, U0', rho0, rho0') with exact vacuum values for
    r >= 1.  `u0`/`u0p`/`rho0_at`/`rho0p_at` evaluate through the ODE dense
    output (exact path); `profile_eval` interpolates the stored nodes.
    """

    k: float
    grid: RadialGrid
    nodes: np.ndarray = field(repr=False)
    U0: np.ndarray = field(repr=False)
    U0p: np.ndarray = field(repr=False)
    rho0: np.ndarray = field(repr=False)
    rho0p: np.ndarray = field(repr=False)
    M: float
    E0: float
    E1: float
    C_lb: float
    emden: EmdenSolution = field(repr=False)
    scale: float = field(repr=False)

    # -- exact-path evaluation ------------------------------------------------

    def _w(self, r):
        r = np.asarray(r, dtype=float)
        return self.scale * self.emden.w(np.minimum(r, 1.0) * self.emden.R)

    def _wp(self, r):
        r = np.asarray(r, dtype=float)
        return self.scale * self.emden.R * self.emden.w_prime(
            np.minimum(r, 1.0) * self.emden.R)

    def u0(self, r):
        rr = np.asarray(r, dtype=float)
        return np.where(rr < 1.0, self.E0 - self._w(rr), -self.M / np.maximum(rr, 1.0))

    def u0p(self, r):
        rr = np.asarray(r, dtype=float)
        return np.where(rr < 1.0, -self._wp(rr), self.M / np.maximum(rr, 1.0) ** 2)

    def rho0_at(self, r):
        rr = np.asarray(r, dtype=float)
        ck = closure_prefactor(self.k)
        w = np.where(rr < 1.0, np.maximum(self._w(rr), 0.0), 0.0)
        return ck * w ** (self.k + 1.5)

    def rho0p_at(self, r):
        rr = np.asarray(r, dtype=float)
        ck = closure_prefactor(self.k)
        w = np.where(rr < 1.0, np.maximum(self._w(rr), 0.0), 0.0)
        return ck * (self.k + 1.5) * w ** (self.k + 0.5) * np.where(rr < 1.0, self._wp(rr), 0.0)

    def ansatz_params(self) -> AnsatzParams:
        return AnsatzParams(self.k, self.E0, self.E1)

    def inv_u0p_over_r(self, r):
        """Smooth even function r / U0'(r), extended through r = 0.

        Used to regularize the 1/U0' prefactor: U0'(r) ~ U0''(0) r near the
        center, so r/U0' has the finite limit 3/(4 pi rho0(0)).
        """
        rr = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.empty_like(rr)
        tiny = rr < 1e-8
        out[tiny] = 3.0 / (4.0 * np.pi * self.rho0_at(np.zeros(1))[0])
        out[~tiny] = rr[~tiny] / self.u0p(rr[~tiny])
        return out.reshape(np.shape(r))


def normalize_profile(raw: EmdenSolution, grid: RadialGrid | None = None) -> RadialProfile:
    """Rescale a raw Emden solution to support radius 1 and fill the grid."""
    if not np.isfinite(raw.R) or raw.R <= 0.0:
        raise ProfileError("raw solution has no finite support radius")
    grid = grid if grid is not None else default_grid()
    k = raw.k
    scale = raw.R ** (2.0 / (k + 0.5))
    M = -scale * raw.R * float(raw.w_prime(np.asarray([raw.R]))[0])
    if M <= 0.0:
        raise ProfileError("non-positive mass after normalization")
    profile = RadialProfile(
        k=k, grid=grid, nodes=grid.nodes,
        U0=np.empty(0), U0p=np.empty(0), rho0=np.empty(0), rho0p=np.empty(0),
        M=M, E0=-M, E1=0.5 * M, C_lb=0.0, emden=raw, scale=scale)
    r = grid.nodes
    U0 = profile.u0(r)
    U0p = profile.u0p(r)
    rho0 = profile.rho0_at(r)
    rho0p = profile.rho0p_at(r)
    if rho0[0] <= 0.0:
        raise ProfileError("central density is not positive")
    if np.any(np.diff(rho0[r <= 1.0]) > 1e-12):
        raise ProfileError("density is not non-increasing")
    if np.any(np.diff(U0) <= 0.0):
        raise ProfileError("potential is not strictly increasing")
    pos = r > 0.0
    C_lb = float(np.min(U0p[pos] / r[pos]))
    if C_lb <= 0.0:
        raise ProfileError("lower bound constant C_lb is not positive")
    object.__setattr__(profile, "U0", U0)
    object.__setattr__(profile, "U0p", U0p)
    object.__setattr__(profile, "rho0", rho0)
    object.__setattr__(profile, "rho0p", rho0p)
    object.__setattr__(profile, "C_lb", C_lb)
    return profile


def build_base_state(k: float = 1.5, w_c: float = 1.0,
                     grid: RadialGrid | None = None):
    """Shooting + normalization; returns (RadialProfile, AnsatzParams)."""
    profile = normalize_profile(solve_emden(k, w_c), grid)
    return profile, profile.ansatz_params()


def profile_eval(p: RadialProfile, r):
    """Interpolated (U0, U0', rho0, rho0') from the stored node values.

    Hermite interpolation inside the support through value, slope and
    curvature data (curvatures follow from the stored columns via the
    Poisson identity U0'' = 4 pi rho0 - 2 U0'/r and the closure chain
    rule); exact vacuum formulas -M/r, M/r^2, 0, 0 for r >= 1.  Raises on
    radii outside [0, 4].
    """
    from .ansatz import AnsatzParams, h_derivatives

    r = np.asarray(r, dtype=float)
    if np.any(r < 0.0) or np.any(r > 4.0):
        raise ValueError("radius outside [0, 4]")
    nodes = p.nodes[p.nodes <= 1.0]
    sl = slice(0, nodes.size)
    u_n, up_n, rho_n, rhop_n = p.U0[sl], p.U0p[sl], p.rho0[sl], p.rho0p[sl]
    upp_n = np.empty_like(u_n)
    upp_n[0] = 4.0 * np.pi / 3.0 * rho_n[0]
    upp_n[1:] = 4.0 * np.pi * rho_n[1:] - 2.0 * up_n[1:] / nodes[1:]
    h1, h2 = h_derivatives(u_n, AnsatzParams(p.k, p.E0, p.E1))
    rhopp_n = h2 * up_n**2 + h1 * upp_n
    u_spl = quintic_hermite(nodes, u_n, up_n, upp_n)
    rho_spl = quintic_hermite(nodes, rho_n, rhop_n, rhopp_n)
    inner = r < 1.0
    rc = np.minimum(r, 1.0)
    rv = np.maximum(r, 1.0)
    U0 = np.where(inner, u_spl(rc), -p.M / rv)
    U0p = np.where(inner, u_spl.derivative()(rc), p.M / rv**2)
    rho0 = np.where(inner, rho_spl(rc), 0.0)
    rho0p = np.where(inner, rho_spl.derivative()(rc), 0.0)
    return U0, U0p, rho0, rho0p


def enclosed_mass_check(p: RadialProfile, n_quad: int = 192) -> float:
    """Max residual of U0'(r) = 4 pi r^-2 int_0^r s^2 rho0 ds over the nodes."""
    x, w = gauss_legendre(n_quad)
    worst = 0.0
    for r in p.nodes[p.nodes > 0.0]:
        s, ws = mapped_rule(0.0, min(r, 1.0), x, w)
        integral = float(np.sum(ws * s**2 * p.rho0_at(s)))
        worst = max(worst, abs(p.u0p(np.asarray([r]))[0] - 4.0 * np.pi * integral / r**2))
    return worst


def export_profile_csv(p: RadialProfile) -> str:
    """CSV export: header with k, M, E0, E1; columns r, U0, U0p, rho0, rho0p."""
    buf = io.StringIO()
    buf.write(f"# k={p.k!r} M={p.M!r} E0={p.E0!r} E1={p.E1!r}\n")
    buf.write("r,U0,U0p,rho0,rho0p\n")
    for i, r in enumerate(p.nodes):
        buf.write(f"{float(r)!r},{float(p.U0[i])!r},{float(p.U0p[i])!r},"
                  f"{float(p.rho0[i])!r},{float(p.rho0p[i])!r}\n")
    return buf.getvalue()
