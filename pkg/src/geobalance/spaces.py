"""Global finite element spaces and the element pairs built from them.

Vector spaces are componentwise copies of a scalar space: scalar DOF ``i``
owns global vector DOFs ``2*i`` (x component) and ``2*i + 1`` (y component).
"""
from dataclasses import dataclass

import numpy as np

from .elements import lagrange_basis

CONTINUOUS = "continuous"
DISCONTINUOUS = "discontinuous"


@dataclass(frozen=True, eq=False)
class ScalarSpace:
    mesh: object
    degree: int
    continuity: str
    dof_map: np.ndarray  # (ntri, nloc) local -> global
    dof_coords: np.ndarray  # (ndof, 2)
    boundary_dofs: np.ndarray

    @property
    def ndof(self):
        return len(self.dof_coords)

    @property
    def basis(self):
        return lagrange_basis(self.degree)

    @property
    def continuous(self):
        return self.continuity == CONTINUOUS

    @property
    def interior_dofs(self):
        return np.setdiff1d(np.arange(self.ndof), self.boundary_dofs)


@dataclass(frozen=True, eq=False)
class VectorSpace:
    scalar: ScalarSpace

    @property
    def ndof(self):
        return 2 * self.scalar.ndof

    @property
    def degree(self):
        return self.scalar.degree

    @property
    def continuity(self):
        return self.scalar.continuity

    @property
    def mesh(self):
        return self.scalar.mesh

    @property
    def dof_map(self):
        """(ntri, 2*nloc) map with local index ``2*a + c``."""
        m = self.scalar.dof_map
        return np.stack([2 * m, 2 * m + 1], axis=-1).reshape(len(m), -1)


@dataclass(frozen=True, eq=False)
class ElementPair:
    name: str
    H: ScalarSpace
    V: VectorSpace
    embeds_gradient: bool
    closed_under_perp: bool

    @property
    def mesh(self):
        return self.H.mesh

    @property
    def is_embedding(self):
        return self.embeds_gradient and self.closed_under_perp

    @property
    def order(self):
        """Minimum polynomial order of the two spaces (the convergence ``k``)."""
        return min(self.H.degree, self.V.degree)


def build_scalar_space(mesh, degree, continuity):
    if continuity not in (CONTINUOUS, DISCONTINUOUS):
        raise ValueError(f"unknown continuity {continuity!r}")
    if continuity == CONTINUOUS and degree < 1:
        raise ValueError("continuous spaces need degree >= 1")
    basis = lagrange_basis(degree)
    nloc = basis.node_count
    ntri = mesh.n_triangles
    if continuity == DISCONTINUOUS:
        dof_map = np.arange(ntri * nloc, dtype=np.int64).reshape(ntri, nloc)
        coords = mesh.map_points(basis.dof_points).reshape(-1, 2)
    else:
        dof_map = _continuous_dof_map(mesh, degree)
        ndof = mesh.n_nodes + mesh.n_edges * (degree - 1) + ntri * (degree - 1) * (degree - 2) // 2
        coords = np.empty((ndof, 2))
        coords[dof_map] = mesh.map_points(basis.dof_points)
    coords.flags.writeable = False
    dof_map.flags.writeable = False
    bnd = _boundary_dofs(mesh, coords)
    return ScalarSpace(mesh, degree, continuity, dof_map, coords, bnd)


def _continuous_dof_map(mesh, k):
    ntri = mesh.n_triangles
    nint = (k - 1) * (k - 2) // 2
    nloc = (k + 1) * (k + 2) // 2
    dof_map = np.empty((ntri, nloc), dtype=np.int64)
    dof_map[:, :3] = mesh.triangles
    base = mesh.n_nodes
    local_edges = ((0, 1), (1, 2), (2, 0))
    for e, (a, b) in enumerate(local_edges):
        eid = mesh.tri_edges[:, e]
        forward = mesh.triangles[:, a] < mesh.triangles[:, b]
        for m in range(k - 1):
            pos = np.where(forward, m, k - 2 - m)
            dof_map[:, 3 + e * (k - 1) + m] = base + eid * (k - 1) + pos
    base += mesh.n_edges * (k - 1)
    if nint:
        dof_map[:, 3 + 3 * (k - 1):] = base + np.arange(ntri * nint).reshape(ntri, nint)
    return dof_map


def _boundary_dofs(mesh, coords, tol=1e-12):
    a, b = mesh.boundary_segments()
    on = np.zeros(len(coords), dtype=bool)
    for p, q in zip(a, b):
        d = q - p
        t = np.clip(((coords - p) @ d) / (d @ d), 0.0, 1.0)
        dist = np.hypot(*(coords - p - t[:, None] * d).T)
        on |= dist < tol
    return np.flatnonzero(on)


_PAIRS = {
    "P0-P1": (0, DISCONTINUOUS, 1),
    "P1DG-P2": (1, DISCONTINUOUS, 2),
    "P2DG-P3": (2, DISCONTINUOUS, 3),
    "P1-P1": (1, CONTINUOUS, 1),
}
_ALIASES = {"P0DG-P1": "P0-P1"}
PAIR_NAMES = tuple(_PAIRS)


def make_pair(name, mesh):
    """Build a named (H, V) pair on ``mesh``."""
    key = _ALIASES.get(name, name)
    if key not in _PAIRS:
        raise ValueError(f"unknown element pair {name!r}; choose from {', '.join(PAIR_NAMES)}")
    vdeg, vcont, hdeg = _PAIRS[key]
    H = build_scalar_space(mesh, hdeg, CONTINUOUS)
    V = VectorSpace(build_scalar_space(mesh, vdeg, vcont))
    # gradients of continuous degree-p fields are discontinuous of degree p-1
    embeds = vcont == DISCONTINUOUS and vdeg >= hdeg - 1
    return ElementPair(key, H, V, embeds_gradient=embeds, closed_under_perp=True)


def interpolate_scalar(space, fn):
    """Nodal interpolation of ``fn(x, y)`` (vectorised over arrays)."""
    c = space.dof_coords
    vals = np.asarray(fn(c[:, 0], c[:, 1]), dtype=float)
    return np.broadcast_to(vals, (space.ndof,)).copy()


def interpolate_vector(space, fn):
    """Nodal interpolation of ``fn(x, y) -> (fx, fy)`` into a vector space."""
    c = space.scalar.dof_coords
    fx, fy = fn(c[:, 0], c[:, 1])
    out = np.empty(space.ndof)
    out[0::2] = np.broadcast_to(fx, (space.scalar.ndof,))
    out[1::2] = np.broadcast_to(fy, (space.scalar.ndof,))
    return out


def interpolate_elementwise(space, values):
    """Set DOFs from per-element values at local DOF points.

    ``values`` has shape (ntri, nloc) for a scalar space or (ntri, nloc, 2)
    for a vector space.  Shared DOFs of continuous spaces take the value from
    the last element that touches them.
    """
    if isinstance(space, VectorSpace):
        out = np.empty(space.ndof)
        out[space.dof_map.ravel()] = np.asarray(values).reshape(-1)
        return out
    out = np.empty(space.ndof)
    out[space.dof_map.ravel()] = np.asarray(values).ravel()
    return out


def element_values(space, coeffs, ref_pts):
    """Field values at reference points in every element.

    Returns (ntri, npts) for scalar spaces and (ntri, npts, 2) for vector spaces.
    """
    if isinstance(space, VectorSpace):
        phi = space.scalar.basis.eval(np.atleast_2d(ref_pts))
        loc = coeffs[space.dof_map].reshape(space.mesh.n_triangles, -1, 2)
        return np.einsum("qa,eac->eqc", phi, loc)
    phi = space.basis.eval(np.atleast_2d(ref_pts))
    return coeffs[space.dof_map] @ phi.T


def element_gradients(space, coeffs, ref_pts):
    """Physical gradients of a scalar field, shape (ntri, npts, 2)."""
    _, _, invT = space.mesh.jacobians()
    dphi = space.basis.grad(np.atleast_2d(ref_pts))
    ref = np.einsum("ea,qak->eqk", coeffs[space.dof_map], dphi)
    return np.einsum("eik,eqk->eqi", invT, ref)


def evaluate(space, coeffs, elem, ref_point):
    """Value of the field at one reference point of one element."""
    coeffs = np.asarray(coeffs)
    if len(coeffs) != space.ndof:
        raise ValueError(f"coefficient vector has length {len(coeffs)}, space has {space.ndof} DOFs")
    if isinstance(space, VectorSpace):
        phi = space.scalar.basis.eval(np.asarray(ref_point, dtype=float))
        loc = coeffs[space.dof_map[elem]].reshape(-1, 2)
        return phi @ loc
    phi = space.basis.eval(np.asarray(ref_point, dtype=float))
    return float(phi @ coeffs[space.dof_map[elem]])


def evaluate_gradient(space, coeffs, elem, ref_point):
    _, _, invT = space.mesh.jacobians()
    dphi = space.basis.grad(np.asarray(ref_point, dtype=float))
    return invT[elem] @ (coeffs[space.dof_map[elem]] @ dphi)


def gradient_into(pair, eta):
    """Interpolate the elementwise gradient of ``eta`` into V.

    Exact (the gradient lies in V) only when ``pair.embeds_gradient``.
    """
    V = pair.V
    g = element_gradients(pair.H, eta, V.scalar.basis.dof_points)
    return interpolate_elementwise(V, g)


def perp(u):
    """Coefficients of u-perp = (-u_y, u_x) in a componentwise vector space."""
    out = np.empty_like(u)
    out[0::2] = -u[1::2]
    out[1::2] = u[0::2]
    return out
