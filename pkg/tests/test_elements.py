from fractions import Fraction
from math import factorial

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geobalance.elements import (
    MAX_BASIS_DEGREE,
    MAX_QUADRATURE_DEGREE,
    lagrange_basis,
    monomial_integral,
    quadrature,
)

DEGREES = range(0, MAX_BASIS_DEGREE + 1)


def exact_mass(basis):
    """Reference mass matrix from the monomial expansion, integrated in closed form."""
    exps = basis.exponents
    mono = np.array([[monomial_integral(a1 + a2, b1 + b2) for a2, b2 in exps] for a1, b1 in exps])
    C = basis.coefficients
    return C.T @ mono @ C


def test_closed_form_monomial():
    # x^2 y^2: 2! 2! / 6!
    assert monomial_integral(2, 2) == pytest.approx(1 / 180, abs=0)
    assert Fraction(factorial(2) * factorial(2), factorial(6)) == Fraction(1, 180)


@pytest.mark.parametrize("k", DEGREES)
def test_kronecker(k):
    b = lagrange_basis(k)
    assert b.node_count == (k + 1) * (k + 2) // 2
    assert np.allclose(b.eval(b.dof_points), np.eye(b.node_count), atol=1e-12, rtol=0)


@pytest.mark.parametrize("k", DEGREES)
def test_partition_of_unity(k):
    pts = np.random.default_rng(k).dirichlet([1, 1, 1], 30)[:, :2]
    assert np.allclose(lagrange_basis(k).eval(pts).sum(axis=1), 1.0, atol=1e-12)


def test_p1_vertex_and_gradient():
    b = lagrange_basis(1)
    assert np.allclose(b.eval(np.array([0.0, 0.0])), [1, 0, 0])
    for p in ([0.2, 0.3], [0.0, 0.0], [0.5, 0.5]):
        assert np.allclose(b.grad(np.array(p))[0], [-1.0, -1.0], atol=1e-14)


def test_p2_edge_midpoint_is_fourth():
    vals = lagrange_basis(2).eval(np.array([0.5, 0.0]))
    expected = np.zeros(6)
    expected[3] = 1.0
    assert np.allclose(vals, expected, atol=1e-12)


def test_p0_constant():
    b = lagrange_basis(0)
    assert b.node_count == 1
    assert np.allclose(b.eval(np.array([[0.1, 0.2], [0.7, 0.1]])), 1.0)
    assert np.allclose(b.grad(np.array([0.3, 0.3])), 0.0)


@pytest.mark.parametrize("k", [-1, MAX_BASIS_DEGREE + 1])
def test_basis_degree_range(k):
    with pytest.raises(ValueError):
        lagrange_basis(k)


@pytest.mark.parametrize("k", DEGREES)
def test_gradient_matches_finite_differences(k):
    b = lagrange_basis(k)
    rng = np.random.default_rng(100 + k)
    pts = rng.dirichlet([2, 2, 2], 20)[:, :2]
    eps = 1e-5
    fd_x = (b.eval(pts + [eps, 0]) - b.eval(pts - [eps, 0])) / (2 * eps)
    fd_y = (b.eval(pts + [0, eps]) - b.eval(pts - [0, eps])) / (2 * eps)
    g = b.grad(pts)
    assert np.allclose(g[..., 0], fd_x, atol=1e-6)
    assert np.allclose(g[..., 1], fd_y, atol=1e-6)


def test_degree1_rule_is_centroid():
    r = quadrature(1)
    assert len(r) == 1
    assert r.weights[0] == pytest.approx(0.5, abs=1e-15)
    assert np.allclose(r.points[0], [1 / 3, 1 / 3])


@pytest.mark.parametrize("d", range(1, MAX_QUADRATURE_DEGREE + 1))
def test_quadrature_monomial_oracle(d):
    r = quadrature(d)
    assert r.exact_degree >= d
    assert np.all(r.weights > 0)
    assert r.weights.sum() == pytest.approx(0.5, abs=1e-14)
    x, y = r.points.T
    for deg in range(d + 1):
        for a in range(deg + 1):
            b = deg - a
            assert abs(r.weights @ (x**a * y**b) - monomial_integral(a, b)) <= 1e-13


def test_degree4_x2y2():
    r = quadrature(4)
    x, y = r.points.T
    assert abs(r.weights @ (x**2 * y**2) - 1 / 180) <= 1e-13


def test_degree8_all_45_monomials():
    r = quadrature(8)
    x, y = r.points.T
    mons = [(a, d - a) for d in range(9) for a in range(d + 1)]
    assert len(mons) == 45
    err = max(abs(r.weights @ (x**a * y**b) - monomial_integral(a, b)) for a, b in mons)
    assert err <= 1e-13


def test_quadrature_degree_limit():
    with pytest.raises(ValueError):
        quadrature(MAX_QUADRATURE_DEGREE + 1)


def test_p1_reference_mass():
    expected = np.array([[2, 1, 1], [1, 2, 1], [1, 1, 2]]) / 24
    assert np.allclose(exact_mass(lagrange_basis(1)), expected, atol=1e-15)


@pytest.mark.parametrize("k", DEGREES)
def test_quadrature_mass_matches_exact(k):
    b = lagrange_basis(k)
    r = quadrature(max(2 * k, 1))
    phi = b.eval(r.points)
    M = np.einsum("q,qa,qb->ab", r.weights, phi, phi)
    assert np.allclose(M, exact_mass(b), atol=1e-13, rtol=0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, MAX_BASIS_DEGREE), st.floats(0.01, 0.98), st.floats(0.0, 1.0))
def test_interpolation_reproduces_basis_polynomials(k, s, t):
    # any degree-k polynomial is reproduced by its nodal interpolant
    b = lagrange_basis(k)
    x, y = s, t * (1 - s)
    coeff = np.arange(1, len(b.exponents) + 1, dtype=float)

    def p(X, Y):
        return sum(c * X**ea * Y**eb for c, (ea, eb) in zip(coeff, b.exponents))

    nodal = p(b.dof_points[:, 0], b.dof_points[:, 1])
    assert b.eval(np.array([x, y])) @ nodal == pytest.approx(p(x, y), abs=1e-11)
