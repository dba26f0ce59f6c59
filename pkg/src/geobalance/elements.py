"""Reference-triangle Lagrange bases and quadrature rules.

The reference triangle has vertices (0,0), (1,0), (0,1).  Local degrees of
freedom are ordered as: the three vertices, then the edges
(v0->v1, v1->v2, v2->v0) with their k-1 interior lattice points listed in
the direction of the edge, then the interior lattice points row by row
(increasing y, then increasing x).  Every other module relies on this order.
"""
from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

MAX_BASIS_DEGREE = 4
MAX_QUADRATURE_DEGREE = 8

REFERENCE_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
REFERENCE_EDGES = ((0, 1), (1, 2), (2, 0))


def lattice_points(k):
    """Integer lattice coordinates (i, j), i + j <= k, in local DOF order."""
    if k == 0:
        return None
    verts = [(0, 0), (k, 0), (0, k)]
    pts = list(verts)
    for a, b in REFERENCE_EDGES:
        (ia, ja), (ib, jb) = verts[a], verts[b]
        for m in range(1, k):
            pts.append((ia + (ib - ia) * m // k, ja + (jb - ja) * m // k))
    for j in range(1, k):
        for i in range(1, k - j):
            pts.append((i, j))
    return pts


def _exponents(k):
    return [(a, d - a) for d in range(k + 1) for a in range(d, -1, -1)]


@dataclass(frozen=True, eq=False)
class ReferenceBasis:
    """Nodal Lagrange basis of total degree ``order`` on the reference triangle."""

    order: int
    dof_points: np.ndarray
    exponents: tuple
    coefficients: np.ndarray  # monomial coefficients, column j is basis j

    @property
    def node_count(self):
        return len(self.dof_points)

    def _monomials(self, pts):
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0:1], pts[:, 1:2]
        a = np.array([e[0] for e in self.exponents])
        b = np.array([e[1] for e in self.exponents])
        return x**a * y**b

    def _monomial_grads(self, pts):
        pts = np.atleast_2d(pts)
        x, y = pts[:, 0:1], pts[:, 1:2]
        a = np.array([e[0] for e in self.exponents])
        b = np.array([e[1] for e in self.exponents])
        dx = a * x ** np.maximum(a - 1, 0) * y**b
        dy = b * x**a * y ** np.maximum(b - 1, 0)
        return dx, dy

    def eval(self, pts):
        """Basis values, shape (npts, nbasis); a single point gives (nbasis,)."""
        single = np.ndim(pts) == 1
        vals = self._monomials(pts) @ self.coefficients
        return vals[0] if single else vals

    def grad(self, pts):
        """Reference gradients, shape (npts, nbasis, 2)."""
        single = np.ndim(pts) == 1
        dx, dy = self._monomial_grads(pts)
        g = np.stack([dx @ self.coefficients, dy @ self.coefficients], axis=-1)
        return g[0] if single else g


@lru_cache(maxsize=None)
def lagrange_basis(k):
    """Return the nodal Lagrange basis of degree ``k`` (0 <= k <= 4)."""
    if not 0 <= k <= MAX_BASIS_DEGREE:
        raise ValueError(f"basis degree {k} outside supported range 0..{MAX_BASIS_DEGREE}")
    if k == 0:
        pts = np.array([[1.0 / 3.0, 1.0 / 3.0]])
        return ReferenceBasis(0, pts, ((0, 0),), np.ones((1, 1)))
    pts = np.array(lattice_points(k), dtype=float) / k
    exps = tuple(_exponents(k))
    vander = pts[:, 0:1] ** np.array([e[0] for e in exps]) * pts[:, 1:2] ** np.array([e[1] for e in exps])
    coef = np.linalg.solve(vander, np.eye(len(pts)))
    return ReferenceBasis(k, pts, exps, coef)


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    exact_degree: int

    def __len__(self):
        return len(self.weights)


def _orbit3(a, w):
    b = 1.0 - 2.0 * a
    bary = [(a, a, b), (a, b, a), (b, a, a)]
    return [(l1, l2) for _, l1, l2 in bary], [w] * 3


def _symmetric_rule(orbits, centroid_weight=None):
    # weights tabulated for unit area, rescaled to the reference area 1/2
    pts, wts = [], []
    if centroid_weight is not None:
        pts.append((1.0 / 3.0, 1.0 / 3.0))
        wts.append(centroid_weight)
    for a, w in orbits:
        p, ww = _orbit3(a, w)
        pts += p
        wts += ww
    return np.array(pts), 0.5 * np.array(wts)


# Symmetric rules with positive weights (Strang-Fix / Dunavant).
_SYMMETRIC = {
    1: ([], 1.0),
    2: ([(1.0 / 6.0, 1.0 / 3.0)], None),
    4: ([(0.445948490915965, 0.223381589678011), (0.091576213509771, 0.109951743655322)], None),
    5: ([(0.470142064105115, 0.132394152788506), (0.101286507323456, 0.125939180544827)], 0.225),
}


def _collapsed_gauss(degree):
    # conical product: Gauss-Legendre along x, Gauss-Jacobi(1,0) along y
    m = degree // 2 + 1
    xs, wx = roots_legendre(m)
    ys, wy = roots_jacobi(m, 1.0, 0.0)
    xs, wx = 0.5 * (xs + 1.0), 0.5 * wx
    ys, wy = 0.5 * (ys + 1.0), 0.25 * wy
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    W = np.outer(wx, wy)
    pts = np.column_stack([(X * (1.0 - Y)).ravel(), Y.ravel()])
    return pts, W.ravel()


def monomial_integral(a, b):
    """Exact integral of x^a y^b over the reference triangle."""
    return factorial(a) * factorial(b) / factorial(a + b + 2)


def certify(rule, degree, tol=1e-13):
    """Check a rule against every monomial of total degree <= ``degree``."""
    x, y = rule.points[:, 0], rule.points[:, 1]
    worst = 0.0
    for d in range(degree + 1):
        for a in range(d + 1):
            b = d - a
            err = abs(rule.weights @ (x**a * y**b) - monomial_integral(a, b))
            worst = max(worst, err)
    if worst > tol:
        raise AssertionError(f"quadrature of degree {degree} fails monomial check (error {worst:.2e})")
    return worst


@lru_cache(maxsize=None)
def quadrature(degree):
    """Positive-weight rule exact for polynomials of total degree ``degree``."""
    if degree > MAX_QUADRATURE_DEGREE:
        raise ValueError(f"no quadrature rule of degree {degree} (max {MAX_QUADRATURE_DEGREE})")
    degree = max(degree, 1)
    for d in sorted(_SYMMETRIC):
        if d >= degree:
            orbits, cw = _SYMMETRIC[d]
            pts, wts = _symmetric_rule(orbits, cw)
            exact = d
            break
    else:
        pts, wts = _collapsed_gauss(degree)
        exact = degree + (degree % 2 == 0)
    rule = QuadratureRule(pts, wts, exact)
    certify(rule, exact)
    return rule
