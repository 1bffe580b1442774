"""State documents, verification and CSV exports.

A state file is a single JSON document: schema tag, config echo, omega and
the raw deformation coefficient curves.  Everything else (density,
potential, diagnostics) is recomputed deterministically from those, which
is what `verify` exploits: it rebuilds the state and compares the
recomputed diagnostics bit-for-bit against the stored ones.
"""

from __future__ import annotations

import io
import json

import numpy as np

from .config import SCHEMA_TAG, Bundle, SolverConfig, build_bundle
from .deformation import DeformationField
from .diagnostics import measure_symmetry
from .errors import ConfigError, RotVlasovError
from .operator import SolutionState, poisson_residual

#: thresholds applied by `verify`; mirrors the per-state acceptance gates
VERIFY_THRESHOLDS = {
    "poisson_residual": 5e-4,
    "mirror_residual": 1e-12,
    "axisymmetry_residual": 1e-8,
    "support_radius": 3.0,
    "consistency": 1e-7,
}


def core_diagnostics(state: SolutionState) -> dict:
    """The deterministic, recomputable diagnostic set of a state."""
    rep = measure_symmetry(state)
    return {
        "omega": state.omega,
        "residual_Y": state.residual,
        "C": state.C,
        "E0_plus_E1": state.params.E0 + state.params.E1,
        "zeta_x_norm": state.zeta.x_norm,
        "support_radius": state.diagnostics["support_radius"],
        "rho_mode_amplitudes": state.diagnostics["rho_mode_amplitudes"],
        "mirror_residual": rep.mirror_residual,
        "sphericity_residual": rep.sphericity_residual,
        "axisymmetry_residual": rep.axisymmetry_residual,
        "flattening": rep.flattening,
        "poisson_residual": poisson_residual(state),
    }


def state_document(state: SolutionState, cfg: SolverConfig,
                   solver_info: dict | None = None) -> dict:
    doc = {
        "schema": SCHEMA_TAG,
        "config": cfg.to_dict(),
        "omega": state.omega,
        "zeta_modes": [list(nm) for nm in state.zeta.space.basis.modes],
        "zeta_nodes": state.zeta.space.r.tolist(),
        "zeta_curves": state.zeta.curves.tolist(),
        "diagnostics": core_diagnostics(state),
    }
    if solver_info:
        doc["solver"] = solver_info
    return doc


def rebuild_state(doc: dict, bundle: Bundle | None = None):
    """Reconstruct (bundle, SolutionState) from a state document."""
    if doc.get("schema") != SCHEMA_TAG:
        raise ConfigError(f"unsupported state schema: {doc.get('schema')!r}")
    cfg = SolverConfig.from_dict(doc["config"])
    if bundle is None or bundle.config != cfg:
        bundle = build_bundle(cfg)
    curves = np.asarray(doc["zeta_curves"], dtype=float)
    zeta = DeformationField(bundle.space, curves)
    state = bundle.ctx.reconstruct_solution(float(doc["omega"]), zeta)
    return bundle, state


def verify_state(doc: dict, bundle: Bundle | None = None) -> dict:
    """Re-run every invariant check on a stored state.

    Returns a report dict with one entry per check; `ok` is the conjunction.
    Recomputed diagnostics must agree bit-for-bit with the stored ones.
    """
    checks = []

    def check(name, passed, value=None, threshold=None):
        checks.append({"name": name, "passed": bool(passed),
                       "value": value, "threshold": threshold})

    try:
        bundle, state = rebuild_state(doc, bundle)
    except RotVlasovError as exc:
        check("rebuild", False, str(exc))
        return {"ok": False, "checks": checks}
    check("rebuild", True)
    cfg = bundle.config
    fresh = core_diagnostics(state)
    stored = doc.get("diagnostics", {})
    match = json.loads(json.dumps(fresh)) == stored
    check("diagnostics_bit_for_bit", match)
    check("residual_below_tol", fresh["residual_Y"] < cfg.newton_tol,
          fresh["residual_Y"], cfg.newton_tol)
    check("max_principle", state.C > fresh["E0_plus_E1"],
          state.C, fresh["E0_plus_E1"])
    check("admissible", state.zeta.admissible(cfg.r_omega),
          state.zeta.x_norm, cfg.r_omega)
    check("support_inside_B3",
          fresh["support_radius"] < VERIFY_THRESHOLDS["support_radius"],
          fresh["support_radius"], VERIFY_THRESHOLDS["support_radius"])
    check("poisson_residual",
          fresh["poisson_residual"] < VERIFY_THRESHOLDS["poisson_residual"],
          fresh["poisson_residual"], VERIFY_THRESHOLDS["poisson_residual"])
    check("mirror_symmetry",
          fresh["mirror_residual"] < VERIFY_THRESHOLDS["mirror_residual"],
          fresh["mirror_residual"], VERIFY_THRESHOLDS["mirror_residual"])
    check("axisymmetry",
          fresh["axisymmetry_residual"] < VERIFY_THRESHOLDS["axisymmetry_residual"],
          fresh["axisymmetry_residual"], VERIFY_THRESHOLDS["axisymmetry_residual"])
    if state.omega != 0.0:
        check("non_spherical", fresh["sphericity_residual"] > 0.0,
              fresh["sphericity_residual"], 0.0)
    ok = all(c["passed"] for c in checks)
    return {"ok": ok, "checks": checks, "diagnostics": fresh}


# -- CSV payloads --------------------------------------------------------------

def solution_fields_csv(state: SolutionState, n_r: int = 61,
                        n_theta: int = 25) -> str:
    """rho and U on an (r, theta) evaluation grid in the phi = 0 half-plane."""
    rs = np.linspace(0.0, 3.0, n_r)
    thetas = np.linspace(0.0, np.pi, n_theta)
    buf = io.StringIO()
    buf.write("r,theta,rho,U\n")
    for th in thetas:
        unit = np.array([np.sin(th), 0.0, np.cos(th)])
        pts = rs[:, None] * unit[None, :]
        rho = state.rho.eval_points(pts)
        u = state.potential.u(pts)
        for i, r in enumerate(rs):
            buf.write(f"{float(r)!r},{float(th)!r},{float(rho[i])!r},{float(u[i])!r}\n")
    return buf.getvalue()


def orbit_csv(sample) -> str:
    buf = io.StringIO()
    buf.write("t,x1,x2,x3,v1,v2,v3,E_J,P,f\n")
    for i, t in enumerate(sample.t):
        row = sample.states[i]
        buf.write(",".join(repr(float(v)) for v in
                           (t, *row, sample.E_J[i], sample.P[i], sample.f[i])))
        buf.write("\n")
    return buf.getvalue()


def state_summary(state: SolutionState) -> dict:
    return {
        "omega": state.omega,
        "residual_Y": state.residual,
        "C": state.C,
        "M": state.profile.M,
        "E0": state.params.E0,
        "E1": state.params.E1,
        "zeta_x_norm": state.zeta.x_norm,
        "rho_mode_amplitudes": state.diagnostics["rho_mode_amplitudes"],
    }


def dump_json(doc: dict) -> str:
    return json.dumps(doc, indent=1, sort_keys=True)
