import numpy as np
import pytest

from rotvlasov import ansatz
from rotvlasov.deformation import DeformationField, g_apply
from rotvlasov.errors import ConfigError
from rotvlasov.operator import poisson_residual

from test_deformation import make_field, sample_ball


@pytest.fixture(scope="module")
def zeta(space):
    return make_field(space, seed=21, amp=0.008)


def test_rho_at_origin_matches_base(ctx, profile):
    rho = ctx.rho_zeta(0.0, DeformationField.zero(ctx.space))
    assert np.max(np.abs(rho.curves[:, 1:])) < 1e-12
    r = ctx.dgrid.nodes
    base = profile.rho0_at(r) * np.sqrt(4.0 * np.pi)
    assert np.max(np.abs(rho.curves[:, 0] - base)) < 1e-11


def test_rho_cutoff_outside_pullback_of_b2(ctx, zeta):
    rho = ctx.rho_zeta(0.02, zeta)
    s = ctx.dgrid.nodes
    far = s / (1.0 + zeta.x_norm) >= 2.0
    assert np.all(rho.samples[far] == 0.0)


def test_rho_positive_inside_image_of_base_support(ctx, zeta, profile):
    # strictly positive at images of interior points of the support
    pts = sample_ball(100, r_max=0.9, seed=22)
    images = g_apply(zeta, pts)
    vals = ctx.rho_zeta(0.02, zeta).eval_points(np.atleast_2d(images))
    assert np.all(vals > 0.0)


def test_rho_vanishes_outside_image_of_b2(ctx, zeta):
    units = ctx.space.basis.units[::7]
    # points just beyond the image of B2 along each ray
    outside = np.array([g_apply(zeta, 2.05 * u)[0] * 1.001 for u in units])
    vals = ctx.rho_zeta(0.02, zeta).eval_points(outside)
    assert np.max(np.abs(vals)) < 1e-12


def test_rho_omega_only_matches_closure_pointwise(ctx, profile, params):
    # zeta = 0: rho(y) = h(U0(|y|) - omega^2 r(y)^2 / 2) at the raw samples
    omega = 0.03
    rho = ctx.rho_zeta(omega, DeformationField.zero(ctx.space))
    s = ctx.dgrid.nodes
    units = ctx.space.basis.units
    expect = ansatz.tilde_h(omega, s[:, None] * np.hypot(units[:, 0], units[:, 1])[None, :],
                            profile.u0(s)[:, None] * np.ones(units.shape[0])[None, :],
                            params)
    assert np.max(np.abs(rho.samples - expect)) < 1e-13


def test_rho_nonnegative_after_inverse_transform(ctx, zeta):
    rho = ctx.rho_zeta(0.03, zeta)
    point_vals = rho.curves @ ctx.space.basis.Y
    assert np.min(point_vals) > -1e-10


def test_t_root_at_origin(ctx):
    T = ctx.T_eval(0.0, DeformationField.zero(ctx.space))
    assert T.y_norm < 1e-8
    assert np.all(T.curves[0, :] == 0.0)


def test_t_quadratic_in_omega(ctx):
    z0 = DeformationField.zero(ctx.space)
    r1 = ctx.T_eval(0.01, z0).y_norm / 0.01**2
    r2 = ctx.T_eval(0.02, z0).y_norm / 0.02**2
    assert abs(r1 / r2 - 1.0) < 0.10


def test_t_rejects_omega_beyond_cap(ctx):
    with pytest.raises(ConfigError):
        ctx.T_eval(ctx.omega_cap * 1.01, DeformationField.zero(ctx.space))


def test_reconstruct_base_state(ctx, profile):
    state = ctx.reconstruct_solution(0.0, DeformationField.zero(ctx.space))
    # U^0 = U0 everywhere, so C makes the potential vanish at infinity
    rng = np.random.default_rng(23)
    pts = sample_ball(80, r_max=3.9, seed=23)
    u = state.potential.u(pts)
    u0 = profile.u0(np.linalg.norm(pts, axis=1))
    assert np.max(np.abs(u - u0)) < 1e-8
    outer = sample_ball(40, r_max=3.9, seed=24)
    outer *= (np.random.default_rng(25).uniform(1.0, 3.9, 40)
              / np.linalg.norm(outer, axis=1))[:, None]
    ru = np.linalg.norm(outer, axis=1)
    assert np.max(np.abs(state.potential.u(outer) + profile.M / ru)) < 1e-8
    assert abs(state.C) < 1e-9


def test_exterior_harmonicity(rot_state):
    # FD Laplacian of U vanishes outside the support of rho
    h = 0.01
    stencil = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / (12.0 * h * h)
    offsets = np.array([-2.0, -1.0, 0.0, 1.0, 2.0]) * h
    rng = np.random.default_rng(26)
    pts = rng.normal(size=(20, 3))
    pts *= (rng.uniform(3.1, 4.4, 20) / np.linalg.norm(pts, axis=1))[:, None]
    lap = np.zeros(20)
    for axis in range(3):
        for c, o in zip(stencil, offsets):
            shift = np.zeros(3)
            shift[axis] = o
            lap += c * rot_state.potential.u(pts + shift[None, :])
    assert np.max(np.abs(lap)) < 1e-5


def test_exterior_continuation_smooth(rot_state):
    # potential and gradient are continuous across the moment hand-off radius
    r_ext = rot_state.potential.r_ext
    for unit in (np.array([1.0, 0, 0]), np.array([0.3, -0.4, 0.866])):
        unit = unit / np.linalg.norm(unit)
        below = rot_state.potential.u((r_ext - 1e-7) * unit[None, :])[0]
        above = rot_state.potential.u((r_ext + 1e-7) * unit[None, :])[0]
        assert above == pytest.approx(below, abs=1e-8)


def test_poisson_residual_base(ctx):
    state = ctx.reconstruct_solution(0.0, DeformationField.zero(ctx.space))
    assert poisson_residual(state) < 5e-4


def test_poisson_residual_rotating(rot_state):
    assert poisson_residual(rot_state) < 5e-4


def test_deformed_potential_identity(rot_state, ctx, profile):
    # U(x) = U0(|g^{-1}(x)|) on B3 (checked by reconstruct; re-probe off-grid)
    from rotvlasov.deformation import g_inverse
    pts = sample_ball(60, r_max=2.8, seed=27)
    u = rot_state.potential.u(pts)
    back = g_inverse(rot_state.zeta, pts)
    u0 = profile.u0(np.linalg.norm(np.atleast_2d(back), axis=1))
    assert np.max(np.abs(u - u0)) < 1e-7


def test_support_confinement(rot_state):
    assert rot_state.diagnostics["support_radius"] < 3.0
    # boundary sits at the image of B2's interior (the bulged unit ball)
    assert rot_state.diagnostics["support_radius"] < 1.2


def test_max_principle_constant(rot_state, params):
    assert rot_state.C > params.E0 + params.E1


def test_solution_state_diagnostics_complete(rot_state):
    d = rot_state.diagnostics
    for key in ("omega", "residual_Y", "C", "zeta_x_norm", "support_radius",
                "rho_mode_amplitudes"):
        assert key in d
