"""Polytropic microscopic ansatz and its macroscopic closure.

The phase-space density is phi(E_J) = (E0 - E_J)_+^k with k > 1.  Velocity
integration turns phi into the spatial closure h, which for polytropes has
the closed form

    h(s) = c_k (E0 - s)_+^(k + 3/2),
    c_k  = 4 pi sqrt(2) Gamma(k+1) Gamma(3/2) / Gamma(k+5/2),

and the rotating-frame closure h~(omega, r, u) = h(u - omega^2 r^2 / 2)
with a hard cutoff for potential values u >= E0 + E1.  A general-phi path
through adaptive quadrature backs the same interface and serves as the
test oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gamma, pi, sqrt

import numpy as np
from scipy.integrate import quad

from .errors import ConfigError


def closure_prefactor(k: float) -> float:
    """Closed-form c_k = 4 pi sqrt(2) * Beta(k+1, 3/2)."""
    return 4.0 * pi * sqrt(2.0) * gamma(k + 1.0) * gamma(1.5) / gamma(k + 2.5)


@dataclass(frozen=True)
class AnsatzParams:
    """Polytropic exponent, cutoff energy and derived closure constants.

    E1 is the cutoff margin U0(2) - E0; it is produced by the base-state
    construction and may be attached later via `with_margin`.
    """

    k: float
    E0: float
    E1: float | None = None

    def __post_init__(self):
        if not self.k > 1.0:
            raise ConfigError(f"polytropic exponent must exceed 1, got k={self.k}")
        if not self.E0 < 0.0:
            raise ConfigError(f"cutoff energy must be negative, got E0={self.E0}")
        if self.E1 is not None and not self.E1 > 0.0:
            raise ConfigError(f"cutoff margin must be positive, got E1={self.E1}")
        object.__setattr__(self, "c_k", closure_prefactor(self.k))

    def with_margin(self, E1: float) -> "AnsatzParams":
        return AnsatzParams(self.k, self.E0, E1)

    @property
    def cutoff_level(self) -> float:
        if self.E1 is None:
            raise ConfigError("E1 not set; build the base state first")
        return self.E0 + self.E1


def phi_eval(E_J, p: AnsatzParams):
    """Microscopic ansatz (E0 - E_J)_+^k."""
    w = np.maximum(p.E0 - np.asarray(E_J, dtype=float), 0.0)
    return w**p.k


def h_eval(s, p: AnsatzParams):
    """Closure h(s) = c_k (E0 - s)_+^(k+3/2)."""
    w = np.maximum(p.E0 - np.asarray(s, dtype=float), 0.0)
    return p.c_k * w ** (p.k + 1.5)


def h_derivatives(s, p: AnsatzParams):
    """First and second derivatives of h; both vanish for s >= E0."""
    w = np.maximum(p.E0 - np.asarray(s, dtype=float), 0.0)
    h1 = -p.c_k * (p.k + 1.5) * w ** (p.k + 0.5)
    h2 = p.c_k * (p.k + 1.5) * (p.k + 0.5) * w ** (p.k - 0.5)
    return h1, h2


def tilde_h(omega: float, r, u, p: AnsatzParams):
    """Rotating closure h(u - omega^2 r^2 / 2), hard-cut at u >= E0 + E1.

    The cutoff applies regardless of the h argument; r is the cylindrical
    radius and must be non-negative.
    """
    u = np.asarray(u, dtype=float)
    r = np.asarray(r, dtype=float)
    vals = h_eval(u - 0.5 * omega**2 * r**2, p)
    return np.where(u < p.cutoff_level, vals, 0.0)


def tilde_h_du(omega: float, r, u, p: AnsatzParams):
    """Partial derivative of tilde_h with respect to the potential value."""
    u = np.asarray(u, dtype=float)
    r = np.asarray(r, dtype=float)
    h1, _ = h_derivatives(u - 0.5 * omega**2 * r**2, p)
    return np.where(u < p.cutoff_level, h1, 0.0)


def f_eval(x, v, U, omega: float, p: AnsatzParams):
    """Phase-space density phi(|v|^2/2 + U(x) - omega^2 r(x)^2 / 2) on B4.

    U is a potential evaluator mapping positions (3,) or (N,3) to values.
    Outside |x| < 4 the density is 0.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    v = np.atleast_2d(np.asarray(v, dtype=float))
    r2 = x[:, 0] ** 2 + x[:, 1] ** 2
    e_j = 0.5 * np.sum(v**2, axis=1) + np.asarray(U(x), dtype=float) - 0.5 * omega**2 * r2
    vals = phi_eval(e_j, p)
    out = np.where(np.linalg.norm(x, axis=1) < 4.0, vals, 0.0)
    return out if out.size > 1 else float(out[0])


# -- general-phi oracle path -------------------------------------------------

def h_from_phi(s: float, phi, E0: float) -> float:
    """Adaptive quadrature of h(s) = 4 pi sqrt(2) int_s^E0 sqrt(E-s) phi(E) dE."""
    if s >= E0:
        return 0.0
    val, _ = quad(lambda e: sqrt(e - s) * phi(e), s, E0,
                  epsabs=1e-14, epsrel=1e-13, limit=200)
    return 4.0 * pi * sqrt(2.0) * val


def h_prime_from_phi(s: float, phi, E0: float) -> float:
    """Adaptive quadrature of h'(s) = -4 pi sqrt(2) int_s^E0 phi(E)/(2 sqrt(E-s)) dE."""
    if s >= E0:
        return 0.0
    # substitute E = s + t^2 to remove the endpoint singularity
    val, _ = quad(lambda t: phi(s + t * t), 0.0, sqrt(E0 - s),
                  epsabs=1e-14, epsrel=1e-13, limit=200)
    return -4.0 * pi * sqrt(2.0) * val


def h_second_from_phi(s: float, phi_prime, E0: float) -> float:
    """Adaptive quadrature of h''(s) = -4 pi sqrt(2) int_s^E0 phi'(E)/(2 sqrt(E-s)) dE."""
    if s >= E0:
        return 0.0
    val, _ = quad(lambda t: phi_prime(s + t * t), 0.0, sqrt(E0 - s),
                  epsabs=1e-14, epsrel=1e-13, limit=200)
    return -4.0 * pi * sqrt(2.0) * val
