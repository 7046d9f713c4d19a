"""Kernel evaluation, real spherical harmonics, saddle assembly, expansions."""

import math

import numpy as np
import pytest
from scipy.special import eval_legendre

import spherelag as sl
from spherelag.kernel import (
    HarmonicBasis,
    assemble_saddle,
    eval_kernel,
    evaluate_expansion,
    harmonic_basis_for,
    kernel_matrix,
    kernel_values,
)
from spherelag.solver import factor_solve

from helpers import fib, random_unit_points, rng, spec

TWO_LOG_TWO = 1.3862943611198906


def sphere_quadrature(n_z=64, n_phi=128):
    """Product rule exact for low-degree harmonics: Gauss-Legendre in z times
    trapezoid in longitude."""
    z, wz = np.polynomial.legendre.leggauss(n_z)
    phi = np.arange(n_phi) * (2.0 * math.pi / n_phi)
    zz, pp = np.meshgrid(z, phi, indexing="ij")
    s = np.sqrt(1.0 - zz**2)
    pts = np.stack([s * np.cos(pp), s * np.sin(pp), zz], axis=-1).reshape(-1, 3)
    w = (wz[:, None] * np.full(n_phi, 2.0 * math.pi / n_phi)).ravel()
    return pts, w


# ---- kernel ---- #

def test_spec_validation_and_derived_fields():
    k2 = sl.KernelSpec(2)
    assert k2.poly_dim == 4
    assert k2.sup_norm == pytest.approx(TWO_LOG_TWO, abs=1e-15)
    assert sl.KernelSpec(3).poly_dim == 9
    for bad in (1, 0, -2, 2.5, "2"):
        with pytest.raises(ValueError):
            sl.KernelSpec(bad)


@pytest.mark.parametrize("m", [2, 3, 4])
def test_sup_norm_matches_grid_scan(m):
    t = np.linspace(-1.0, 1.0 - 1e-9, 400_001)
    scanned = np.abs((1.0 - t) ** (m - 1) * np.log(1.0 - t)).max()
    assert sl.KernelSpec(m).sup_norm == pytest.approx(2 ** (m - 1) * math.log(2.0), rel=1e-12)
    assert scanned <= sl.KernelSpec(m).sup_norm * (1.0 + 1e-12)


def test_kernel_values_at_reference_points():
    assert kernel_values(spec(2), 1.0) == 0.0  # coincident pair
    assert kernel_values(spec(2), -1.0) == pytest.approx(TWO_LOG_TWO, abs=1e-15)
    # (-1)^3 (1/2)^2 log(1/2) = log(2)/4
    assert kernel_values(spec(3), 0.5) == pytest.approx(0.17328679513998632, abs=1e-16)
    assert kernel_values(spec(2), 1.0 - 1e-15) == 0.0  # below the surface cutoff


def test_kernel_values_vectorized_matches_scalar():
    t = rng(0).uniform(-1.0, 1.0, 200)
    vec = kernel_values(spec(2), t)
    assert np.array_equal(vec, [kernel_values(spec(2), ti) for ti in t])


def test_kernel_sign_alternates_with_order():
    # near the antipode s = 1 - t is close to 2, log s > 0
    assert kernel_values(spec(2), -0.9) > 0.0
    assert kernel_values(spec(3), -0.9) < 0.0
    assert kernel_values(spec(4), -0.9) > 0.0


def test_eval_kernel_symmetric_and_consistent():
    a = random_unit_points(50, seed=1)
    b = random_unit_points(50, seed=2)
    k_ab = eval_kernel(spec(2), a, b)
    assert np.array_equal(k_ab, eval_kernel(spec(2), b, a))
    t = np.einsum("ij,ij->i", a, b)
    assert np.allclose(k_ab, kernel_values(spec(2), t), atol=1e-15)


def test_kernel_matrix_bitwise_symmetric_zero_diagonal():
    pts = random_unit_points(80, seed=3)
    K = kernel_matrix(spec(2), pts)
    assert np.array_equal(K, K.T)
    assert np.all(np.diag(K) == 0.0)


def test_kernel_matrix_cross_block_matches_loop():
    a = random_unit_points(12, seed=4)
    b = random_unit_points(9, seed=5)
    K = kernel_matrix(spec(3), a, b)
    for i in range(12):
        for j in range(9):
            assert K[i, j] == pytest.approx(float(eval_kernel(spec(3), a[i], b[j])), abs=1e-15)


@pytest.mark.parametrize("m", [2, 3])
def test_constrained_quadratic_form_is_positive(m):
    # a^T K a > 0 whenever Phi^T a = 0 and a != 0
    pts = fib(60).points
    K = kernel_matrix(spec(m), pts)
    phi = harmonic_basis_for(spec(m)).eval(pts)
    q, _ = np.linalg.qr(phi)
    for seed in range(6):
        v = rng(seed).normal(size=60)
        a = v - q @ (q.T @ v)
        assert np.linalg.norm(a) > 1e-8
        assert a @ K @ a > 0.0


# ---- harmonics ---- #

def test_basis_size_and_labels():
    basis = HarmonicBasis(2)
    assert basis.n_funcs == 9
    assert basis.orders() == [
        (0, 0), (1, 0), (1, 1), (1, -1), (2, 0), (2, 1), (2, -1), (2, 2), (2, -2),
    ]
    with pytest.raises(ValueError):
        HarmonicBasis(-1)


def test_orthonormality_under_quadrature():
    pts, w = sphere_quadrature()
    phi = HarmonicBasis(2).eval(pts)
    gram = phi.T @ (w[:, None] * phi)
    assert np.allclose(gram, np.eye(9), atol=1e-12)


def test_north_pole_values():
    vals = HarmonicBasis(1).eval(np.array([0.0, 0.0, 1.0]))
    assert vals == pytest.approx(
        [0.28209479177387814, 0.4886025119029199, 0.0, 0.0], abs=1e-15
    )


def test_degree_one_is_scaled_coordinates():
    pts = random_unit_points(40, seed=9)
    phi = HarmonicBasis(1).eval(pts)
    c = 0.4886025119029199  # sqrt(3 / 4pi)
    assert np.allclose(phi[:, 1], c * pts[:, 2], atol=1e-14)
    assert np.allclose(phi[:, 2], c * pts[:, 0], atol=1e-14)
    assert np.allclose(phi[:, 3], c * pts[:, 1], atol=1e-14)


@pytest.mark.parametrize("ell", [0, 1, 2, 3])
def test_addition_theorem(ell):
    # sum_m Y_lm(x) Y_lm(y) = (2l+1)/(4pi) P_l(x . y)
    basis = HarmonicBasis(3)
    labels = np.array([lab[0] for lab in basis.orders()])
    x = random_unit_points(30, seed=13)
    y = random_unit_points(30, seed=14)
    phi_x, phi_y = basis.eval(x), basis.eval(y)
    sel = labels == ell
    got = np.einsum("ij,ij->i", phi_x[:, sel], phi_y[:, sel])
    expected = (2 * ell + 1) / (4.0 * math.pi) * eval_legendre(ell, np.einsum("ij,ij->i", x, y))
    assert np.allclose(got, expected, atol=1e-13)


def test_eval_finite_at_poles_and_shapes():
    poles = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
    vals = HarmonicBasis(3).eval(poles)
    assert vals.shape == (2, 16)
    assert np.all(np.isfinite(vals))
    single = HarmonicBasis(3).eval(poles[0])
    assert single.shape == (16,)
    assert np.array_equal(single, vals[0])


def test_constraint_space_degree():
    assert harmonic_basis_for(spec(2)).degree_max == 1
    assert harmonic_basis_for(spec(4)).degree_max == 3


# ---- assembly and expansion evaluation ---- #

def test_saddle_assembly_layout():
    ns = fib(25)
    system = assemble_saddle(spec(2), ns)
    M = system.matrix
    assert M.shape == (29, 29)
    assert np.array_equal(M, M.T)
    assert np.all(M[25:, 25:] == 0.0)
    sub = assemble_saddle(spec(2), ns, subset=[0, 3, 7, 9, 11])
    assert sub.matrix.shape == (9, 9)


@pytest.mark.parametrize("m", [2, 3])
def test_saddle_solve_reproduces_harmonic_data(m):
    # data sampled from the constrained space must come back with zero kernel part
    ns = fib(80)
    system = assemble_saddle(spec(m), ns)
    phi = harmonic_basis_for(spec(m)).eval(ns.points)
    for j in (0, spec(m).poly_dim - 1):
        rhs = np.concatenate([phi[:, j], np.zeros(spec(m).poly_dim)])
        a, c = factor_solve(system, rhs)
        assert np.abs(a).max() < 1e-8
        expected = np.zeros(spec(m).poly_dim)
        expected[j] = 1.0
        assert np.allclose(c, expected, atol=1e-8)


def test_evaluate_expansion_matches_dense_oracle():
    centers = fib(70).points
    g = rng(17)
    a = g.normal(size=70)
    c = g.normal(size=4)
    points = random_unit_points(130, seed=18)
    K = kernel_matrix(spec(2), points, centers)
    phi = HarmonicBasis(1).eval(points)
    expected = K @ a + phi @ c
    got = evaluate_expansion(spec(2), centers, a, c, points)
    assert np.allclose(got, expected, atol=1e-13)


def test_evaluate_expansion_blocking_invariance():
    centers = fib(40).points
    g = rng(19)
    a = g.normal(size=(40, 3))
    c = g.normal(size=(4, 3))
    points = random_unit_points(900, seed=20)
    full = evaluate_expansion(spec(2), centers, a, c, points, block_size=10_000)
    tiny = evaluate_expansion(spec(2), centers, a, c, points, block_size=17)
    # block shape steers BLAS accumulation order; equality holds to rounding
    assert np.allclose(full, tiny, atol=1e-12)
    assert full.shape == (900, 3)


def test_evaluate_expansion_single_point_and_bad_poly_count():
    centers = fib(10).points
    out = evaluate_expansion(spec(2), centers, np.ones(10), np.zeros(4), centers[0])
    assert np.ndim(out) == 0 or out.shape == ()
    with pytest.raises(ValueError):
        evaluate_expansion(spec(2), centers, np.ones(10), np.zeros(5), centers[:3])
