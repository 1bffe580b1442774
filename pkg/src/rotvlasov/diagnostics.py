"""Physics diagnostics: characteristic orbits and symmetry measures."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from . import ansatz
from .errors import RotVlasovError
from .operator import SolutionState


@dataclass
class OrbitSample:
    """One integrated characteristic with its conserved-quantity series."""

    x0: np.ndarray
    v0: np.ndarray
    t: np.ndarray
    states: np.ndarray        # (N, 6) positions and velocities
    E_J: np.ndarray
    P: np.ndarray             # third angular-momentum component
    f: np.ndarray
    escaped: bool

    @property
    def e_j_drift(self) -> float:
        scale = max(abs(self.E_J[0]), 1e-30)
        return float(np.max(np.abs(self.E_J - self.E_J[0])) / scale)

    @property
    def f_drift(self) -> float:
        return float(np.max(np.abs(self.f - self.f[0])))

    @property
    def max_radius(self) -> float:
        return float(np.max(np.linalg.norm(self.states[:, :3], axis=1)))


def jacobi_integral(state: SolutionState, x, v) -> float:
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    r2 = x[0] ** 2 + x[1] ** 2
    return float(0.5 * v @ v + state.potential.u(x[None, :])[0]
                 - 0.5 * state.omega**2 * r2)


def integrate_characteristic(state: SolutionState, x0, v0, t_end: float,
                             tol: float = 1e-11, n_samples: int = 400) -> OrbitSample:
    """Integrate the rotating-frame characteristic system.

    x' = v, v' = -grad U - 2 Omega x v - Omega x (Omega x x) with Omega along
    the third axis; E_J, P and the phase-space density are recorded on a
    uniform sample grid.  Requires a bound orbit (E_J < E0); an escape from
    B4 flags the state as defective rather than raising.
    """
    x0 = np.asarray(x0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    if jacobi_integral(state, x0, v0) >= state.params.E0:
        raise RotVlasovError("initial condition is not a bound orbit (E_J >= E0)")
    omega = state.omega
    pot = state.potential

    def rhs(_, y):
        x, v = y[:3], y[3:]
        g = pot.grad(x[None, :])[0]
        acc = -g
        acc[0] += omega**2 * x[0] + 2.0 * omega * v[1]
        acc[1] += omega**2 * x[1] - 2.0 * omega * v[0]
        return np.concatenate([v, acc])

    def escape(_, y):
        return float(np.linalg.norm(y[:3]) - 4.0)

    escape.terminal = True
    escape.direction = 1

    t_eval = np.linspace(0.0, t_end, n_samples)
    sol = solve_ivp(rhs, (0.0, t_end), np.concatenate([x0, v0]),
                    method="DOP853", rtol=tol, atol=tol * 1e-2,
                    t_eval=t_eval, events=escape, dense_output=False)
    states = sol.y.T
    xs, vs = states[:, :3], states[:, 3:]
    r2 = xs[:, 0] ** 2 + xs[:, 1] ** 2
    u = pot.u(xs)
    e_j = 0.5 * np.sum(vs**2, axis=1) + u - 0.5 * omega**2 * r2
    p = xs[:, 0] * vs[:, 1] - xs[:, 1] * vs[:, 0]
    f = np.where(np.linalg.norm(xs, axis=1) < 4.0,
                 ansatz.phi_eval(e_j, state.params), 0.0)
    return OrbitSample(x0, v0, sol.t, states, e_j, p, f,
                       escaped=bool(sol.t_events[0].size))


def circular_orbit_speed(state: SolutionState, r: float) -> float:
    """Rotating-frame tangential speed of the circular equatorial orbit at r.

    Balances gravity against centrifugal and Coriolis terms:
    v = -omega r + sqrt(r dU/dr).
    """
    dudr = float(state.potential.grad(np.array([[r, 0.0, 0.0]]))[0, 0])
    if dudr <= 0.0:
        raise RotVlasovError("no circular orbit: outward potential gradient")
    return -state.omega * r + np.sqrt(r * dudr)


_REFLECTIONS = (np.diag([1.0, 1.0, -1.0]), np.diag([1.0, -1.0, 1.0]),
                np.diag([-1.0, 1.0, 1.0]))


@dataclass
class SymmetryReport:
    mirror_residual: float        # max |rho(Ax) - rho(x)| over A in S
    sphericity_residual: float    # relative size of all (n,m) != (0,0) modes
    axisymmetry_residual: float   # relative size of all m != 0 modes
    flattening: float             # (equatorial - polar boundary radius) / equatorial


def measure_symmetry(state: SolutionState, n_probes: int = 64,
                     seed: int = 1) -> SymmetryReport:
    """Mirror/sphericity/axisymmetry residuals and the oblateness measure.

    The boundary radius along a direction is where the density first hits
    zero; it is located through the equivalent level set U - omega^2 r^2/2
    = E0, which is noise-free near the cubic-vanishing density edge.
    Positive flattening means oblate.
    """
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n_probes, 3))
    pts *= (rng.uniform(0.1, 1.3, n_probes) / np.linalg.norm(pts, axis=1))[:, None]
    base = state.rho.eval_points(pts)
    mirror = 0.0
    for A in _REFLECTIONS:
        mirror = max(mirror, float(np.max(np.abs(state.rho.eval_points(pts @ A.T)
                                                 - base))))
    amps = state.rho.curves
    scale = float(np.max(np.abs(amps[:, 0])))
    spher = 0.0
    axi = 0.0
    for i, (n, m) in enumerate(state.rho.basis.modes):
        a = float(np.max(np.abs(amps[:, i])))
        if (n, m) != (0, 0):
            spher = max(spher, a)
        if m != 0:
            axi = max(axi, a)
    r_eq = _boundary_radius(state, np.array([1.0, 0.0, 0.0]))
    r_pol = _boundary_radius(state, np.array([0.0, 0.0, 1.0]))
    return SymmetryReport(mirror, spher / scale, axi / scale,
                          (r_eq - r_pol) / r_eq)


def _boundary_radius(state: SolutionState, unit: np.ndarray) -> float:
    cyl = np.hypot(unit[0], unit[1])

    def level(r):
        u = state.potential.u(r * unit[None, :])[0]
        return u - 0.5 * (state.omega * cyl * r) ** 2 - state.params.E0

    return brentq(level, 0.2, 2.5, xtol=1e-13)
