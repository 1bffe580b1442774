"""Gauss-Legendre / Gauss-Lobatto rules and composite radial grids."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre as _leg


def gauss_legendre(n: int):
    """Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1]."""
    return _leg.leggauss(n)


def gauss_lobatto(n: int):
    """Nodes and weights of the n-point Gauss-Lobatto rule on [-1, 1].

    Interior nodes are the roots of P'_{n-1}; endpoints are included,
    which makes these convenient interpolation/storage nodes.
    """
    if n < 2:
        raise ValueError("Lobatto rule needs at least 2 nodes")
    coeffs = np.zeros(n)
    coeffs[-1] = 1.0
    interior = _leg.legroots(_leg.legder(coeffs))
    nodes = np.concatenate(([-1.0], interior, [1.0]))
    pl = _leg.legval(nodes, coeffs)
    weights = 2.0 / (n * (n - 1) * pl**2)
    return nodes, weights


def mapped_rule(a: float, b: float, nodes, weights):
    """Affinely map a reference rule from [-1, 1] to [a, b]."""
    half = 0.5 * (b - a)
    return a + half * (nodes + 1.0), half * weights


def quintic_hermite(x: np.ndarray, f: np.ndarray, fp: np.ndarray,
                    fpp: np.ndarray):
    """C^2 piecewise-quintic interpolant of (value, slope, curvature) data.

    Closed-form coefficients, vectorized over intervals and any trailing
    axes of f; returns a scipy PPoly.
    """
    from scipy.interpolate import PPoly

    f = np.asarray(f, dtype=float)
    pad = (slice(None),) + (None,) * (f.ndim - 1)
    h = np.diff(x)[pad]
    f0, f1 = f[:-1], f[1:]
    d0, d1 = fp[:-1], fp[1:]
    s0, s1 = fpp[:-1], fpp[1:]
    u = (f1 - f0 - d0 * h - 0.5 * s0 * h**2) / h**3
    v = (d1 - d0 - s0 * h) / h**2
    w = (s1 - s0) / h
    c = np.empty((6,) + u.shape)
    c[0] = (12.0 * u - 6.0 * v + w) / (2.0 * h**2)
    c[1] = (-15.0 * u + 7.0 * v - w) / h
    c[2] = 10.0 * u - 4.0 * v + 0.5 * w
    c[3] = 0.5 * s0
    c[4] = d0
    c[5] = f0
    return PPoly(c, x)


def barycentric_weights(nodes) -> np.ndarray:
    """Barycentric interpolation weights for a small node set."""
    nodes = np.asarray(nodes, dtype=float)
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    return 1.0 / np.prod(diff, axis=1)


def barycentric_matrix(nodes, bw, t) -> np.ndarray:
    """Evaluation matrix E with p(t) = E @ p(nodes) for the interpolant.

    Exact node hits are routed to the corresponding unit row.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    d = t[:, None] - nodes[None, :]
    exact_row, exact_col = np.nonzero(d == 0.0)
    d[exact_row, :] = 1.0  # avoid division by zero; rows rewritten below
    w = bw[None, :] / d
    out = w / np.sum(w, axis=1, keepdims=True)
    out[exact_row, :] = 0.0
    out[exact_row, exact_col] = 1.0
    return out


@dataclass(frozen=True)
class Panel:
    a: float
    b: float
    nodes: np.ndarray      # global coordinates
    weights: np.ndarray    # quadrature weights in global coordinates
    bary: np.ndarray       # barycentric weights of the panel nodes
    index: slice           # slice into the grid's global node array


@dataclass(frozen=True)
class RadialGrid:
    """Composite quadrature/storage grid on a union of radial panels.

    kind='lobatto' shares panel endpoints (storage grids for field curves),
    kind='gauss' keeps panels disjoint (quadrature grids for densities).
    """

    edges: tuple
    points_per_panel: tuple
    kind: str
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    panels: tuple = field(repr=False)

    @classmethod
    def build(cls, edges, points_per_panel, kind="lobatto") -> "RadialGrid":
        edges = tuple(float(e) for e in edges)
        if isinstance(points_per_panel, int):
            points_per_panel = (points_per_panel,) * (len(edges) - 1)
        points_per_panel = tuple(int(q) for q in points_per_panel)
        if len(points_per_panel) != len(edges) - 1:
            raise ValueError("need one point count per panel")
        ref = {q: (gauss_lobatto(q) if kind == "lobatto" else gauss_legendre(q))
               for q in set(points_per_panel)}
        all_nodes: list[float] = []
        all_weights: list[float] = []
        panels = []
        for (a, b), q in zip(zip(edges[:-1], edges[1:]), points_per_panel):
            x, w = mapped_rule(a, b, *ref[q])
            start = len(all_nodes)
            if kind == "lobatto" and all_nodes and np.isclose(all_nodes[-1], x[0]):
                # shared endpoint: merge node, accumulate weight
                all_weights[-1] += w[0]
                start -= 1
                x_store, w_store = x[1:], w[1:]
            else:
                x_store, w_store = x, w
            all_nodes.extend(x_store)
            all_weights.extend(w_store)
            panels.append(Panel(a, b, x, w, barycentric_weights(x),
                                slice(start, len(all_nodes))))
        return cls(edges, points_per_panel, kind,
                   np.asarray(all_nodes), np.asarray(all_weights), tuple(panels))

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    def panel_of(self, r: float) -> int:
        """Index of the panel whose closed interval contains r."""
        if r < self.edges[0] or r > self.edges[-1]:
            raise ValueError(f"radius {r} outside grid [{self.edges[0]}, {self.edges[-1]}]")
        k = int(np.searchsorted(self.edges, r, side="right") - 1)
        return min(max(k, 0), len(self.panels) - 1)

    def panel_values(self, values: np.ndarray, p: int) -> np.ndarray:
        """Rows of `values` (nodes x ...) belonging to panel p."""
        panel = self.panels[p]
        if self.kind == "gauss":
            return values[panel.index]
        # lobatto panels share endpoints; rebuild the full panel row set
        idx = np.searchsorted(self.nodes, panel.nodes)
        return values[idx]

    def panel_node_indices(self, p: int) -> np.ndarray:
        panel = self.panels[p]
        return np.searchsorted(self.nodes, panel.nodes)
