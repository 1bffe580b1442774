"""Run configuration and the cached solver context bundle.

A single JSON-serializable document holds every physical and numerical
parameter; rebuilding a bundle from an identical document is deterministic,
which is what makes stored states re-verifiable bit-for-bit.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import asdict, dataclass, field, fields

from .basestate import build_base_state, default_grid
from .deformation import DEFAULT_R_OMEGA, FieldSpace
from .errors import ConfigError
from .harmonics import SymmetryBasis
from .operator import DENSITY_EDGES, OperatorContext
from .quadrature import RadialGrid

SCHEMA_TAG = "rotvlasov-state/1"


@dataclass(frozen=True)
class SolverConfig:
    k: float = 1.5
    w_c: float = 1.0
    n_max: int = 8
    nodes_per_panel: int = 64
    density_points: int = 16
    newton_tol: float = 1e-9
    max_iters: int = 30
    use_full_derivative: bool = False
    r_omega: float = DEFAULT_R_OMEGA
    orbit_tol: float = 1e-11

    def __post_init__(self):
        if not self.k > 1.0:
            raise ConfigError("k must exceed 1")
        if self.w_c <= 0.0:
            raise ConfigError("w_c must be positive")
        if self.n_max < 0 or self.n_max % 2 != 0:
            raise ConfigError("n_max must be even and non-negative")
        if self.nodes_per_panel < 8 or self.density_points < 6:
            raise ConfigError("grid resolutions too small")
        if self.newton_tol <= 0.0 or self.max_iters < 1:
            raise ConfigError("invalid solver tolerances")
        if not 0.0 < self.r_omega <= 0.2:
            raise ConfigError("r_omega must lie in (0, 0.2]")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "SolverConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**doc)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def cache_key(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()


@dataclass
class Bundle:
    """Everything a solve needs, assembled once per configuration."""

    config: SolverConfig
    profile: object
    params: object
    space: FieldSpace
    ctx: OperatorContext
    ops: dict = field(repr=False)

    @property
    def omega_cap(self) -> float:
        return self.ctx.omega_cap


_cache: dict[str, Bundle] = {}
_cache_lock = threading.Lock()


def build_bundle(cfg: SolverConfig, cache: bool = True) -> Bundle:
    """Construct (or fetch) the profile, basis, operator context and K LUs."""
    from .linearized import build_mode_operators

    key = cfg.cache_key()
    if cache:
        with _cache_lock:
            if key in _cache:
                return _cache[key]
    grid = default_grid(cfg.nodes_per_panel)
    profile, params = build_base_state(cfg.k, cfg.w_c, grid)
    basis = SymmetryBasis.build(cfg.n_max)
    space = FieldSpace(basis, grid)
    dgrid = RadialGrid.build(DENSITY_EDGES, cfg.density_points, kind="gauss")
    ctx = OperatorContext(profile, params, space, density_grid=dgrid,
                          r_omega=cfg.r_omega)
    ops = build_mode_operators(ctx)
    bundle = Bundle(cfg, profile, params, space, ctx, ops)
    if cache:
        with _cache_lock:
            _cache.setdefault(key, bundle)
    return bundle


def clear_bundle_cache():
    with _cache_lock:
        _cache.clear()
