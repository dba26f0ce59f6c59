import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geobalance import spaces
from geobalance.elements import quadrature
from geobalance.mesh import generate_square_mesh
from geobalance.spaces import (
    CONTINUOUS,
    DISCONTINUOUS,
    build_scalar_space,
    evaluate,
    evaluate_gradient,
    interpolate_scalar,
    make_pair,
)

EMBEDDING = ["P0-P1", "P1DG-P2", "P2DG-P3"]


@pytest.fixture(scope="module")
def mesh4():
    return generate_square_mesh(4, 0.0, 0)


@pytest.fixture(scope="module")
def mesh_perturbed():
    return generate_square_mesh(6, 0.25, 5)


def test_scalar_dof_counts(mesh4):
    assert build_scalar_space(mesh4, 1, CONTINUOUS).ndof == 25
    # one extra DOF per edge, counted from the edge table
    assert build_scalar_space(mesh4, 2, CONTINUOUS).ndof == 25 + len(mesh4.edge_table)
    assert len(mesh4.edge_table) == 56
    assert build_scalar_space(mesh4, 1, DISCONTINUOUS).ndof == 96


def test_continuous_degree_zero_rejected(mesh4):
    with pytest.raises(ValueError):
        build_scalar_space(mesh4, 0, CONTINUOUS)


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_continuous_shared_dofs_coincide(mesh_perturbed, k):
    s = build_scalar_space(mesh_perturbed, k, CONTINUOUS)
    # every element's local lattice points map to the recorded global coordinates
    local = mesh_perturbed.map_points(s.basis.dof_points)
    assert np.allclose(s.dof_coords[s.dof_map], local, atol=1e-14)
    # no two global DOFs share a location
    rounded = {tuple(np.round(c, 12)) for c in s.dof_coords}
    assert len(rounded) == s.ndof


@pytest.mark.parametrize("k,cont", [(1, CONTINUOUS), (3, CONTINUOUS), (0, DISCONTINUOUS), (2, DISCONTINUOUS)])
def test_boundary_dofs(mesh4, k, cont):
    s = build_scalar_space(mesh4, k, cont)
    c = s.dof_coords
    on = np.isclose(c, 0.0, atol=1e-12).any(axis=1) | np.isclose(c, 1.0, atol=1e-12).any(axis=1)
    assert np.array_equal(np.flatnonzero(on), s.boundary_dofs)


def test_pair_counts(mesh4):
    p = make_pair("P1DG-P2", mesh4)
    assert (p.H.ndof, p.V.ndof, p.embeds_gradient) == (81, 192, True)
    p = make_pair("P0-P1", generate_square_mesh(1))
    assert (p.V.ndof, p.H.ndof) == (4, 4)
    assert make_pair("P0DG-P1", mesh4).name == "P0-P1"


def test_pair_flags(mesh4):
    for name in EMBEDDING:
        p = make_pair(name, mesh4)
        assert p.embeds_gradient and p.closed_under_perp
    p = make_pair("P1-P1", mesh4)
    assert not p.embeds_gradient and p.closed_under_perp
    with pytest.raises(ValueError):
        make_pair("RT0-P0", mesh4)


def test_interpolate_constant_and_linear(mesh_perturbed):
    s = build_scalar_space(mesh_perturbed, 1, CONTINUOUS)
    assert np.all(interpolate_scalar(s, lambda x, y: 1.0) == 1.0)
    c = interpolate_scalar(s, lambda x, y: x)
    rng = np.random.default_rng(0)
    for _ in range(20):
        e = int(rng.integers(mesh_perturbed.n_triangles))
        ref = rng.dirichlet([1, 1, 1])[:2]
        x = mesh_perturbed.map_points(ref)[e, 0, 0]
        assert evaluate(s, c, e, ref) == pytest.approx(x, abs=1e-14)


def test_hat_function(mesh4):
    s = build_scalar_space(mesh4, 1, CONTINUOUS)
    c = np.zeros(s.ndof)
    c[12] = 1.0
    e, loc = np.argwhere(s.dof_map == 12)[0]
    assert evaluate(s, c, e, s.basis.dof_points[loc]) == 1.0


def _l2_interp_error(space, fn):
    rule = quadrature(8)
    c = interpolate_scalar(space, fn)
    xy = space.mesh.map_points(rule.points)
    diff = spaces.element_values(space, c, rule.points) - fn(xy[..., 0], xy[..., 1])
    _, det, _ = space.mesh.jacobians()
    return math.sqrt(np.einsum("q,e,eq->", rule.weights, det, diff**2))


def test_p2_interpolation_order():
    def fn(x, y):
        return np.cos(np.pi * x) * np.cos(np.pi * y)

    e4 = _l2_interp_error(build_scalar_space(generate_square_mesh(4), 2, CONTINUOUS), fn)
    e8 = _l2_interp_error(build_scalar_space(generate_square_mesh(8), 2, CONTINUOUS), fn)
    assert 8 / 1.25 <= e4 / e8 <= 8 * 1.25


def test_gradient_finite_differences(mesh_perturbed):
    s = build_scalar_space(mesh_perturbed, 2, CONTINUOUS)
    rng = np.random.default_rng(3)
    c = rng.standard_normal(s.ndof)
    J, _, _ = mesh_perturbed.jacobians()
    eps = 1e-5
    for _ in range(10):
        e = int(rng.integers(mesh_perturbed.n_triangles))
        ref = rng.dirichlet([3, 3, 3])[:2]
        g = evaluate_gradient(s, c, e, ref)
        Jinv = np.linalg.inv(J[e])
        fd = []
        for d in np.eye(2):
            dr = Jinv @ (eps * d)
            fd.append((evaluate(s, c, e, ref + dr) - evaluate(s, c, e, ref - dr)) / (2 * eps))
        assert np.allclose(g, fd, atol=1e-6 * max(1, np.abs(g).max()))


def test_evaluate_length_check(mesh4):
    s = build_scalar_space(mesh4, 1, CONTINUOUS)
    with pytest.raises(ValueError):
        evaluate(s, np.zeros(3), 0, [0.2, 0.2])


def _sample(mesh, n, seed):
    rng = np.random.default_rng(seed)
    return rng.dirichlet([1, 1, 1], n)[:, :2]


@settings(max_examples=6, deadline=None)
@given(st.sampled_from(EMBEDDING), st.integers(0, 10**6))
def test_condition1_witness(name, seed):
    mesh = generate_square_mesh(4, 0.2, seed % 97)
    p = make_pair(name, mesh)
    eta = np.random.default_rng(seed).uniform(-1, 1, p.H.ndof)
    q = spaces.gradient_into(p, eta)
    pts = _sample(mesh, 10, seed)
    got = spaces.element_values(p.V, q, pts)
    exact = spaces.element_gradients(p.H, eta, pts)
    assert np.allclose(got, exact, atol=1e-13 * max(1.0, np.abs(exact).max()), rtol=0)


@settings(max_examples=8, deadline=None)
@given(st.sampled_from(EMBEDDING + ["P1-P1"]), st.integers(0, 10**6))
def test_condition2_witness(name, seed):
    mesh = generate_square_mesh(3, 0.2, seed % 89)
    p = make_pair(name, mesh)
    u = np.random.default_rng(seed).standard_normal(p.V.ndof)
    up = spaces.perp(u)
    pts = _sample(mesh, 10, seed)
    a = spaces.element_values(p.V, u, pts)
    b = spaces.element_values(p.V, up, pts)
    assert np.allclose(b[..., 0], -a[..., 1], atol=1e-13)
    assert np.allclose(b[..., 1], a[..., 0], atol=1e-13)


def test_vector_interleaving(mesh4):
    p = make_pair("P1DG-P2", mesh4)
    u = spaces.interpolate_vector(p.V, lambda x, y: (np.ones_like(x), 2 * np.ones_like(y)))
    assert np.all(u[0::2] == 1.0) and np.all(u[1::2] == 2.0)
    assert np.allclose(evaluate(p.V, u, 3, [0.2, 0.3]), [1.0, 2.0])
