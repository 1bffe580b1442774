import numpy as np
import pytest

from rotvlasov.deformation import (DEFAULT_R_OMEGA, DeformationField, FieldSpace,
                                   YField, g_apply, g_inverse, g_jacobian,
                                   invert_along_ray, invert_rays_batch, x_norm,
                                   y_norm)
from rotvlasov.errors import InverseMapError
from rotvlasov.harmonics import SymmetryBasis
from rotvlasov.quadrature import RadialGrid

import oracles

REFLECTIONS = (np.diag([1.0, 1.0, -1.0]), np.diag([1.0, -1.0, 1.0]),
               np.diag([-1.0, 1.0, 1.0]))


def make_field(space, seed=1, amp=0.01, decay=1.0):
    rng = np.random.default_rng(seed)
    curves = np.zeros((space.grid.n_nodes, space.n_modes))
    r = space.r
    for i, (n, m) in enumerate(space.basis.modes):
        curves[:, i] = rng.normal() * amp / (1 + n) * r * np.exp(-decay * r)
    return DeformationField(space, curves)


@pytest.fixture(scope="module")
def zeta(space):
    return make_field(space, seed=1, amp=0.01)


def sample_ball(n, r_max=4.0, seed=2):
    rng = np.random.default_rng(seed)
    pts = rng.normal(size=(n, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    return pts * rng.uniform(0.01, r_max, n)[:, None]


def test_zero_field_is_identity(space):
    z0 = DeformationField.zero(space)
    pts = sample_ball(50)
    assert np.max(np.abs(g_apply(z0, pts) - pts)) == 0.0
    assert x_norm(z0) == 0.0
    assert np.max(np.abs(g_inverse(z0, pts * 0.5) - pts * 0.5)) == 0.0


def test_center_fixed(zeta):
    assert np.all(g_apply(zeta, np.zeros((1, 3))) == 0.0)


def test_radial_bounds(zeta):
    pts = sample_ball(1000, seed=3)
    g = g_apply(zeta, pts)
    rg = np.linalg.norm(g, axis=1)
    rp = np.linalg.norm(pts, axis=1)
    assert np.all(rg >= 0.5 * rp) and np.all(rg <= 1.5 * rp)


def test_image_of_b2_inside_b3(zeta):
    pts = sample_ball(500, r_max=2.0, seed=4)
    rg = np.linalg.norm(g_apply(zeta, pts), axis=1)
    assert np.all(rg < 3.0)


def test_equivariance(zeta):
    pts = sample_ball(200, seed=5)
    g = g_apply(zeta, pts)
    for A in REFLECTIONS:
        assert np.max(np.abs(g_apply(zeta, pts @ A.T) - g @ A.T)) < 1e-14


def test_jacobian_closed_form(zeta):
    rng = np.random.default_rng(6)
    for _ in range(12):
        x = rng.normal(size=3)
        x *= rng.uniform(0.2, 3.5) / np.linalg.norm(x)
        J = g_jacobian(zeta, x)
        Jfd = np.zeros((3, 3))
        h = 1e-6
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            Jfd[:, i] = (g_apply(zeta, x + e) - g_apply(zeta, x - e)) / (2 * h)
        scale = max(1.0, np.max(np.abs(J)))
        assert np.max(np.abs(J - Jfd)) / scale < 1e-6


def test_jacobian_near_identity(zeta):
    # |Dg - id| < 1/2 for admissible fields (here much smaller)
    rng = np.random.default_rng(7)
    for _ in range(30):
        x = rng.normal(size=3)
        x *= rng.uniform(0.05, 3.9) / np.linalg.norm(x)
        J = g_jacobian(zeta, x)
        assert np.linalg.norm(J - np.eye(3), 2) < 0.5
        Jinv = np.linalg.inv(J)
        assert np.linalg.norm(Jinv - np.eye(3), 2) < 0.5


def test_jacobian_identity_for_zero(space):
    assert np.max(np.abs(g_jacobian(DeformationField.zero(space),
                                    np.array([0.3, -0.2, 0.5]))
                         - np.eye(3))) == 0.0
    with pytest.raises(ValueError):
        g_jacobian(DeformationField.zero(space), np.zeros(3))


def test_inverse_round_trip(zeta):
    pts = sample_ball(300, r_max=2.9, seed=8)
    y = g_apply(zeta, pts)
    # keep targets within B3 where the inverse is defined
    keep = np.linalg.norm(y, axis=1) <= 3.0
    back = g_inverse(zeta, y[keep])
    fwd = g_apply(zeta, back)
    assert np.max(np.abs(fwd - y[keep])) < 1e-10


def test_inverse_rejects_outside_b3(zeta):
    with pytest.raises(InverseMapError):
        g_inverse(zeta, np.array([[3.4, 0.0, 0.0]]))


def test_ray_order_preservation(zeta):
    unit = np.array([0.3, -0.5, 0.81])
    unit /= np.linalg.norm(unit)
    ts = np.linspace(0.05, 4.0, 60)
    radii = np.linalg.norm(g_apply(zeta, ts[:, None] * unit[None, :]), axis=1)
    assert np.all(np.diff(radii) > 0.0)


def test_lipschitz_in_zeta(space):
    # |g^{-1}_z(y) - g^{-1}_z'(y)| <= C |z - z'|_X |y| with the lemma's C = 4
    z1 = make_field(space, seed=10, amp=0.012)
    z2 = make_field(space, seed=11, amp=0.012)
    dz = x_norm(z1 - z2)
    pts = sample_ball(200, r_max=2.9, seed=12)
    a = g_inverse(z1, pts)
    b = g_inverse(z2, pts)
    gap = np.linalg.norm(a - b, axis=1)
    assert np.all(gap <= 4.0 * dz * np.linalg.norm(pts, axis=1) + 1e-12)


def test_batch_inversion_matches_single(zeta, basis):
    radii = np.array([0.2, 0.9, 1.8, 2.7])
    batch = invert_rays_batch(zeta, radii)
    for a in (0, 17, 64, 111):
        single = invert_along_ray(zeta, basis.units[a], radii)
        assert np.max(np.abs(batch[:, a] - single)) < 1e-11


def test_x_norm_examples(space):
    # zeta(x) = |x| has gradient of unit length everywhere
    curves = np.zeros((space.grid.n_nodes, space.n_modes))
    curves[:, 0] = space.r * np.sqrt(4.0 * np.pi)
    assert x_norm(DeformationField(space, curves)) == pytest.approx(1.0, rel=1e-10)


def test_norm_grid_refinement(basis):
    # doubling the radial grid changes the norm of a smooth field by < 1%
    vals = {}
    for npp in (64, 128):
        grid = RadialGrid.build((0.0, 1.0, 2.0, 4.0), npp, kind="lobatto")
        sp = FieldSpace(basis, grid)
        z = make_field(sp, seed=13, amp=0.02)
        vals[npp] = x_norm(z)
    assert abs(vals[128] / vals[64] - 1.0) < 0.01


def test_y_norm_limit_and_values(space):
    # f with curves ~ r^2 has |grad f| / r bounded; the pure radial mode
    # f = r^2 Y00-normalized has gradient 2r and Y-norm 2
    curves = np.zeros((space.grid.n_nodes, space.n_modes))
    curves[:, 0] = space.r**2 * np.sqrt(4.0 * np.pi)
    f = YField(space, curves)
    assert y_norm(f) == pytest.approx(2.0, rel=1e-8)


def test_admissibility(space, zeta):
    assert zeta.admissible(DEFAULT_R_OMEGA)
    big = zeta.scaled(50.0)
    assert not big.admissible(DEFAULT_R_OMEGA)


def test_field_eval_points_match_modes(space, zeta):
    pts = sample_ball(40, r_max=3.5, seed=14)
    vals = zeta.eval_points(pts)
    r = np.linalg.norm(pts, axis=1)
    units = pts / r[:, None]
    Y = space.basis.eval_at(units)
    expected = np.einsum("nm,mn->n", zeta.spline(r), Y)
    assert np.max(np.abs(vals - expected)) < 1e-14


def test_curves_shape_guard(space):
    with pytest.raises(ValueError):
        DeformationField(space, np.zeros((3, space.n_modes)))
