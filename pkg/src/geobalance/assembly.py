"""Sparse assembly of the mass, gradient, Coriolis and stiffness operators.

All integrands are polynomial on affine triangles, so every operator is
assembled with a rule that integrates it exactly.
"""
from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.sparse as sp

from .elements import MAX_QUADRATURE_DEGREE, quadrature

SYMMETRIC = "symmetric"
SKEW = "skew"
GENERAL = "general"

# w . v_perp for unit vectors e_c, e_d: perp(e_0) = e_1, perp(e_1) = -e_0
_PERP_BLOCK = np.array([[0.0, -1.0], [1.0, 0.0]])


@dataclass(frozen=True, eq=False)
class SparseOperator:
    matrix: sp.csr_matrix
    symmetry: str = GENERAL

    @property
    def nrows(self):
        return self.matrix.shape[0]

    @property
    def ncols(self):
        return self.matrix.shape[1]

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def T(self):
        return self.matrix.T.tocsr()

    def __matmul__(self, other):
        return self.matrix @ other

    def toarray(self):
        return self.matrix.toarray()

    def max_abs(self):
        return float(abs(self.matrix).max()) if self.matrix.nnz else 0.0

    def symmetry_defect(self):
        """Relative max-norm of A - A^T (symmetric) or A + A^T (skew)."""
        sign = {SYMMETRIC: -1.0, SKEW: 1.0}.get(self.symmetry)
        if sign is None:
            return 0.0
        d = self.matrix + sign * self.matrix.T
        scale = self.max_abs()
        return float(abs(d).max()) / scale if d.nnz and scale else 0.0


def _compress(rows, cols, vals, shape, symmetry):
    # COO -> CSR sums duplicates in element order, so the result is deterministic
    A = sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=shape).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return SparseOperator(A, symmetry)


def _rule(degree, override):
    d = degree if override is None else override
    return quadrature(min(max(d, 1), MAX_QUADRATURE_DEGREE))


def _scalar_mass_blocks(space, rule):
    _, det, _ = space.mesh.jacobians()
    phi = space.basis.eval(rule.points)
    return np.einsum("q,e,qa,qb->eab", rule.weights, np.abs(det), phi, phi)


def _physical_grads(space, rule):
    _, _, invT = space.mesh.jacobians()
    return np.einsum("eij,qaj->eqai", invT, space.basis.grad(rule.points))


def _square(dof_map, blocks, n, symmetry):
    rows = np.broadcast_to(dof_map[:, :, None], blocks.shape)
    cols = np.broadcast_to(dof_map[:, None, :], blocks.shape)
    return _compress(rows, cols, blocks, (n, n), symmetry)


def scalar_mass(space, degree=None):
    rule = _rule(2 * space.degree, degree)
    return _square(space.dof_map, _scalar_mass_blocks(space, rule), space.ndof, SYMMETRIC)


def velocity_mass(pair, degree=None):
    V = pair.V
    rule = _rule(2 * V.degree, degree)
    m = _scalar_mass_blocks(V.scalar, rule)
    blocks = np.einsum("eab,cd->eacbd", m, np.eye(2)).reshape(len(m), 2 * m.shape[1], 2 * m.shape[1])
    return _square(V.dof_map, blocks, V.ndof, SYMMETRIC)


def pressure_mass(pair, degree=None):
    return scalar_mass(pair.H, degree)


def gradient_op(pair, degree=None):
    """G[i, j] = integral of w_i . grad(phi_j), shape (V.ndof, H.ndof).

    Its transpose is the weak divergence used in the continuity equation.
    """
    V, H = pair.V, pair.H
    rule = _rule(V.degree + H.degree - 1, degree)
    _, det, _ = H.mesh.jacobians()
    psi = V.scalar.basis.eval(rule.points)
    dphi = _physical_grads(H, rule)
    blocks = np.einsum("q,e,qa,eqbc->eacb", rule.weights, np.abs(det), psi, dphi)
    ne, nv = len(blocks), psi.shape[1]
    blocks = blocks.reshape(ne, 2 * nv, -1)
    rows = np.broadcast_to(V.dof_map[:, :, None], blocks.shape)
    cols = np.broadcast_to(H.dof_map[:, None, :], blocks.shape)
    return _compress(rows, cols, blocks, (V.ndof, H.ndof), GENERAL)


def coriolis_op(pair, degree=None):
    """C[i, j] = integral of w_i . perp(w_j); skew-symmetric."""
    V = pair.V
    rule = _rule(2 * V.degree, degree)
    m = _scalar_mass_blocks(V.scalar, rule)
    blocks = np.einsum("eab,cd->eacbd", m, _PERP_BLOCK).reshape(len(m), 2 * m.shape[1], 2 * m.shape[1])
    return _square(V.dof_map, blocks, V.ndof, SKEW)


def stiffness(pair, degree=None):
    """K[i, j] = integral of grad(phi_i) . grad(phi_j) on H."""
    H = pair.H
    rule = _rule(2 * (H.degree - 1), degree)
    _, det, _ = H.mesh.jacobians()
    g = _physical_grads(H, rule)
    blocks = np.einsum("q,e,eqac,eqbc->eab", rule.weights, np.abs(det), g, g)
    return _square(H.dof_map, blocks, H.ndof, SYMMETRIC)


@dataclass(frozen=True, eq=False)
class Operators:
    Mu: SparseOperator
    Meta: SparseOperator
    G: SparseOperator
    C: SparseOperator
    K: SparseOperator


def assemble(pair, degree=None):
    return Operators(
        velocity_mass(pair, degree),
        pressure_mass(pair, degree),
        gradient_op(pair, degree),
        coriolis_op(pair, degree),
        stiffness(pair, degree),
    )


def inverse_velocity_mass(pair, Mu=None):
    """Sparse inverse of M_u, computed blockwise when V is discontinuous.

    For continuous V the inverse is dense (returned as a CSR matrix).
    """
    Mu = velocity_mass(pair) if Mu is None else Mu
    V = pair.V
    if V.continuity == "discontinuous":
        dm = V.dof_map
        A = Mu.matrix
        blocks = np.stack([A[d][:, d].toarray() for d in dm])
        inv = np.linalg.inv(blocks)
        rows = np.broadcast_to(dm[:, :, None], inv.shape)
        cols = np.broadcast_to(dm[:, None, :], inv.shape)
        return sp.coo_matrix((inv.ravel(), (rows.ravel(), cols.ravel())), shape=A.shape).tocsr()
    return sp.csr_matrix(np.linalg.inv(Mu.toarray()))


def write_matrix_market(op, target):
    """Write an operator in Matrix Market coordinate format (general, 1-based)."""
    A = op.matrix if isinstance(op, SparseOperator) else op
    scipy.io.mmwrite(target, sp.coo_matrix(A), field="real", symmetry="general", precision=17)


def read_matrix_market(source, symmetry=GENERAL):
    return SparseOperator(sp.csr_matrix(scipy.io.mmread(source)), symmetry)
