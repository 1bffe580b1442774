import numpy as np
import pytest
from numpy.polynomial.legendre import leggauss

from rotvlasov.harmonics import (MultipoleSolver, SymmetryBasis,
                                 full_degree_matrix, kernel_k, legendre_P,
                                 newtonian_potential)
from rotvlasov.quadrature import RadialGrid

REFLECTIONS = (np.diag([1.0, 1.0, -1.0]), np.diag([1.0, -1.0, 1.0]),
               np.diag([-1.0, 1.0, 1.0]))


def rand_units(n, seed=0):
    rng = np.random.default_rng(seed)
    u = rng.normal(size=(n, 3))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


# -- Legendre polynomials ------------------------------------------------------

def test_legendre_basics():
    t = np.linspace(-1, 1, 41)
    assert np.all(legendre_P(0, t) == 1.0)
    assert legendre_P(2, 0.5) == pytest.approx(-0.125, abs=1e-15)
    for n in range(9):
        assert legendre_P(n, 1.0) == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(ValueError):
        legendre_P(3, 1.5)


def test_legendre_against_scipy():
    from scipy.special import eval_legendre
    t = np.linspace(-1, 1, 101)
    for n in range(11):
        assert np.max(np.abs(legendre_P(n, t) - eval_legendre(n, t))) < 1e-13


# -- basis structure -----------------------------------------------------------

def test_mode_list_structure(basis):
    for n, m in basis.modes:
        assert n % 2 == 0 and m % 2 == 0 and 0 <= m <= n
    degrees = sorted({n for n, _ in basis.modes})
    assert degrees == [0, 2, 4, 6, 8]
    for n in degrees:
        count = sum(1 for nn, _ in basis.modes if nn == n)
        assert count == n // 2 + 1          # dim of the S-invariant subspace


def test_degree_dimension_by_symmetrization(basis):
    # symmetrizing the full degree-n set over S has rank n/2 + 1
    units = rand_units(60, seed=3)
    for n in (2, 4, 6, 8):
        full = full_degree_matrix(n, units)
        sym = full.copy()
        for A in REFLECTIONS:
            sym = sym + full_degree_matrix(n, units @ A.T)
        # careful: symmetrize over the generated 8-element group
        group = []
        for sx in (1, -1):
            for sy in (1, -1):
                for sz in (1, -1):
                    group.append(np.diag([sx, sy, sz]))
        sym = sum(full_degree_matrix(n, units @ A.T) for A in group)
        rank = np.linalg.matrix_rank(sym, tol=1e-10)
        assert rank == n // 2 + 1


def test_reference_values(basis):
    assert basis.eval_basis(0, 0, (0.3, -0.4, np.sqrt(0.75))) == pytest.approx(
        1.0 / np.sqrt(4 * np.pi), rel=1e-14)
    # degree-2 zonal at the pole vs 1D-quadrature normalization oracle
    x, w = leggauss(200)
    p2 = 0.5 * (3 * x**2 - 1)
    c = 1.0 / np.sqrt(2 * np.pi * np.sum(w * p2**2))
    assert basis.eval_basis(2, 0, (0.0, 0.0, 1.0)) == pytest.approx(c, rel=1e-12)
    assert c == pytest.approx(np.sqrt(5 / (4 * np.pi)), rel=1e-12)


def test_eval_basis_guards(basis):
    with pytest.raises(KeyError):
        basis.eval_basis(1, 0, (0, 0, 1.0))
    with pytest.raises(KeyError):
        basis.eval_basis(2, 1, (0, 0, 1.0))
    with pytest.raises(ValueError):
        basis.eval_basis(2, 0, (0, 0, 1.1))


def test_explicit_degree_two_forms(basis):
    # degree-2 members restricted to the sphere, against closed forms
    units = rand_units(30, seed=4)
    x, y, z = units.T
    y20 = np.sqrt(5 / (16 * np.pi)) * (3 * z**2 - 1)
    y22 = np.sqrt(15 / (16 * np.pi)) * (x**2 - y**2)
    vals = basis.eval_at(units)
    assert np.max(np.abs(vals[basis.mode_index(2, 0)] - y20)) < 1e-13
    assert np.max(np.abs(vals[basis.mode_index(2, 2)] - y22)) < 1e-13


def test_homogeneity_of_solid_harmonics(basis):
    # r^n Y_nm extends each basis function to a homogeneous polynomial:
    # evaluating the extension at t*xi scales by t^n
    units = rand_units(10, seed=5)
    vals = basis.eval_at(units)
    for i, (n, m) in enumerate(basis.modes):
        for t in (0.5, 2.0):
            solid_at_txi = t**n * vals[i]
            assert np.max(np.abs(
                t**n * basis.eval_at(units)[i] - solid_at_txi)) == 0.0
    # degree-2 solid harmonics are the expected quadratic polynomials
    pts = 1.7 * units
    r2 = np.sum(pts**2, axis=1)
    solid = r2 * basis.eval_at(units)[basis.mode_index(2, 0)]
    expected = np.sqrt(5 / (16 * np.pi)) * (3 * pts[:, 2] ** 2 - r2)
    assert np.max(np.abs(solid - expected)) < 1e-13


def test_s_invariance(basis):
    units = rand_units(40, seed=6)
    base = basis.eval_at(units)
    for A in REFLECTIONS:
        mapped = basis.eval_at(units @ A.T)
        assert np.max(np.abs(mapped - base)) < 1e-13


def test_gram_identity(basis):
    G = basis.gram_matrix()
    assert np.max(np.abs(G - np.eye(basis.n_modes))) < 1e-12


# -- transforms ----------------------------------------------------------------

def test_forward_constant(basis):
    samples = np.full(basis.units.shape[0], 2.5)
    c = basis.forward(samples)
    assert c[0] == pytest.approx(2.5 * np.sqrt(4 * np.pi), rel=1e-14)
    assert np.max(np.abs(c[1:])) < 1e-14


def test_round_trip_and_parseval(basis):
    rng = np.random.default_rng(11)
    c = rng.normal(size=basis.n_modes)
    samples = basis.inverse(c)
    c2 = basis.forward(samples)
    assert np.max(np.abs(c2 - c)) < 1e-12
    quad_energy = float(np.sum(basis.weights * samples**2))
    assert quad_energy == pytest.approx(float(c @ c), rel=1e-12)


def test_odd_parity_killed(basis):
    vals = basis.units[:, 2] + 0.3 * basis.units[:, 0] * basis.units[:, 1]
    assert np.max(np.abs(basis.forward(vals))) < 1e-14


def test_zero_and_single_mode_inverse(basis):
    zero = basis.inverse(np.zeros(basis.n_modes))
    assert np.all(zero == 0.0)
    c = np.zeros(basis.n_modes)
    c[basis.mode_index(2, 0)] = 1.0
    samples = basis.inverse(c)
    assert np.max(np.abs(samples - basis.Y[basis.mode_index(2, 0)])) == 0.0


def test_band_limited_exactness(basis):
    # product of two basis members is band-limited within quadrature degree
    i, j = basis.mode_index(2, 2), basis.mode_index(4, 0)
    prod = basis.Y[i] * basis.Y[j]
    c = basis.forward(prod)
    back = basis.inverse(c)
    assert np.max(np.abs(back - prod)) < 1e-12


def test_grid_sizes():
    with pytest.raises(ValueError):
        SymmetryBasis.build(8, n_theta=8)
    with pytest.raises(ValueError):
        SymmetryBasis.build(7)
    b = SymmetryBasis.build(4)
    assert b.n_theta >= 5 and b.n_phi >= 10


# -- addition theorem and kernel expansion --------------------------------------

def test_addition_theorem():
    rng = np.random.default_rng(12)
    for _ in range(50):
        xi, eta = rand_units(2, seed=rng.integers(1 << 30))
        for n in (0, 2, 4, 6, 8):
            lhs = float(np.sum(full_degree_matrix(n, xi[None, :])
                               * full_degree_matrix(n, eta[None, :])))
            rhs = (2 * n + 1) / (4 * np.pi) * float(legendre_P(n, xi @ eta))
            assert abs(lhs - rhs) < 1e-10


def test_kernel_expansion_geometric_decay():
    x = np.array([0.0, 0.0, 2.0])
    rng = np.random.default_rng(13)
    etas = rand_units(20, seed=14)
    s = 1.0
    ratio = s / 2.0
    for eta in etas:
        y = s * eta
        direct = 1.0 / np.linalg.norm(x - y)
        cosg = x @ y / (np.linalg.norm(x) * s)
        partial = 0.0
        errs = []
        for n in range(13):
            partial += (ratio**n) * legendre_P(n, cosg) / 2.0
            errs.append(abs(partial - direct))
        # geometric envelope at the radius ratio
        for n in (4, 6, 8, 10):
            assert errs[n] <= 2.0 * ratio ** (n + 1)


def test_kernel_expansion_radius_ratios():
    rng = np.random.default_rng(15)
    for ratio in (0.3, 0.6, 0.9):
        R, s = 1.5, 1.5 * ratio
        xi, eta = rand_units(2, seed=16)
        direct = 1.0 / np.linalg.norm(R * xi - s * eta)
        total = sum((s / R) ** n * legendre_P(n, xi @ eta) / R
                    for n in range(120))
        assert total == pytest.approx(direct, rel=3.0 * ratio**120 + 1e-12)


# -- multipole potential --------------------------------------------------------

@pytest.fixture(scope="module")
def dgrid():
    return RadialGrid.build((0.0, 0.5, 1.0, 2.0, 3.0), 14, kind="gauss")


def test_uniform_ball_potential(basis, dgrid):
    targets = np.array([0.0, 0.2, 0.55, 0.83, 1.0, 1.7, 2.9, 4.0])
    rho = np.zeros((dgrid.n_nodes, basis.n_modes))
    rho[dgrid.nodes <= 1.0, 0] = np.sqrt(4.0 * np.pi)
    pc = newtonian_potential(basis, dgrid, rho, targets)
    vals = pc.V[:, 0] / np.sqrt(4.0 * np.pi)
    exact = np.where(targets <= 1.0, -2.0 * np.pi * (1.0 - targets**2 / 3.0),
                     -4.0 * np.pi / (3.0 * np.maximum(targets, 1.0)))
    assert np.max(np.abs(vals - exact)) < 1e-12
    slopes = pc.Vp[:, 0] / np.sqrt(4.0 * np.pi)
    exact_p = np.where(targets <= 1.0, 4.0 * np.pi * targets / 3.0,
                       4.0 * np.pi / (3.0 * np.maximum(targets, 1.0) ** 2))
    assert np.max(np.abs(slopes - exact_p)) < 1e-12


def test_uniform_ball_against_3d_quadrature(basis, dgrid):
    import oracles
    targets = np.array([0.42, 1.3])
    rho = np.zeros((dgrid.n_nodes, basis.n_modes))
    rho[dgrid.nodes <= 1.0, 0] = np.sqrt(4.0 * np.pi)
    pc = newtonian_potential(basis, dgrid, rho, targets)
    for j, r in enumerate(targets):
        direct = -oracles.axisym_ball_integral(
            r, (0.0, 1.0), lambda s: np.ones_like(s), subtract_center=False)
        assert pc.V[j, 0] / np.sqrt(4.0 * np.pi) == pytest.approx(direct, rel=1e-9)


def test_base_profile_closed_radial_formula(bundle):
    # V of rho0 against -4pi/|x| int_0^|x| s^2 rho - 4pi int_|x|^inf s rho
    from scipy.integrate import quad
    profile = bundle.profile
    basis = bundle.space.basis
    dg = bundle.ctx.dgrid
    curves = np.zeros((dg.n_nodes, basis.n_modes))
    curves[:, 0] = profile.rho0_at(dg.nodes) * np.sqrt(4.0 * np.pi)
    targets = np.array([0.0, 0.31, 0.77, 1.0, 1.9, 3.4])
    pc = newtonian_potential(basis, dg, curves, targets)
    for j, r in enumerate(targets):
        inner, _ = quad(lambda s: s**2 * float(profile.rho0_at(np.asarray(s))),
                        0.0, min(r, 1.0), epsabs=1e-13, epsrel=1e-12)
        outer, _ = quad(lambda s: s * float(profile.rho0_at(np.asarray(s))),
                        min(r, 1.0), 1.0, epsabs=1e-13, epsrel=1e-12)
        expected = (-4.0 * np.pi * inner / r - 4.0 * np.pi * outer if r > 0
                    else -4.0 * np.pi * outer)
        got = pc.V[j, 0] * basis.Y[0, 0]
        assert got == pytest.approx(expected, abs=1e-8)


def test_truncated_kernel_shell_decay(basis, dgrid):
    # potential of a thin-band density probed at (0,0,2): the degree-n
    # contribution scales like (s/2)^n, so the N_max tail is ~(1/2)^(N+1)
    s0 = 1.0
    mask = np.abs(dgrid.nodes - s0) < 0.07
    samples = np.zeros((dgrid.n_nodes, basis.units.shape[0]))
    samples[mask] = 1.0 + basis.units[None, :, 2] ** 2
    curves = basis.forward(samples)
    pc = newtonian_potential(basis, dgrid, curves, np.array([2.0]))
    contrib = np.abs(pc.V[0])
    degs = np.array([n for n, _ in basis.modes])
    top = max(contrib[degs == 8])
    base = max(contrib[degs == 2])
    assert top < base * (0.5 ** 6) * 30.0   # geometric decay with slack


def test_kernel_k_stability():
    r = np.array([0.0, 1e-12, 0.5, 2.0])
    s = np.array([1e-9, 0.5, 1.0])
    for n in (0, 2, 8):
        vals = kernel_k(n, r[:, None], s[None, :])
        assert np.all(np.isfinite(vals)) and np.all(vals >= 0.0)
