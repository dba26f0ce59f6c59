"""Conforming triangular meshes of polygonal domains."""
from dataclasses import dataclass

import numpy as np

from .elements import REFERENCE_EDGES


class MeshError(ValueError):
    """Raised for malformed mesh files or invalid mesh data."""


@dataclass(frozen=True, eq=False)
class AffineMap:
    """Map x = jacobian @ xi + origin from the reference triangle."""

    jacobian: np.ndarray
    origin: np.ndarray
    det: float
    inv_transpose: np.ndarray

    def __call__(self, ref_pts):
        return np.atleast_2d(ref_pts) @ self.jacobian.T + self.origin


class Mesh:
    """Immutable triangulation with derived edge topology.

    ``triangles`` are stored counterclockwise.  Local edge ``e`` of a
    triangle joins local vertices ``REFERENCE_EDGES[e]``.
    """

    def __init__(self, nodes, triangles):
        nodes = np.array(nodes, dtype=float).reshape(-1, 2)
        tris = np.array(triangles, dtype=np.int64).reshape(-1, 3)
        if tris.size and (tris.min() < 0 or tris.max() >= len(nodes)):
            raise MeshError("triangle references a node index out of range")
        area = _signed_areas(nodes, tris)
        if np.any(area == 0.0):
            raise MeshError(f"zero-area triangle at index {int(np.argmin(np.abs(area)))}")
        flip = area < 0
        tris[flip] = tris[flip][:, [0, 2, 1]]
        self.nodes = nodes
        self.triangles = tris
        self._build_topology()
        for arr in (self.nodes, self.triangles, self.edges, self.tri_edges, self.edge_tris):
            arr.flags.writeable = False

    def _build_topology(self):
        tris = self.triangles
        table = {}
        tri_edges = np.empty_like(tris)
        edges, edge_tris = [], []
        for t, tri in enumerate(tris):
            for e, (a, b) in enumerate(REFERENCE_EDGES):
                key = (min(tri[a], tri[b]), max(tri[a], tri[b]))
                if key in table:
                    eid = table[key]
                    if edge_tris[eid][1] != -1:
                        raise MeshError(f"edge {key} shared by more than two triangles")
                    edge_tris[eid][1] = t
                else:
                    eid = len(edges)
                    table[key] = eid
                    edges.append(key)
                    edge_tris.append([t, -1])
                tri_edges[t, e] = eid
        self.edges = np.array(edges, dtype=np.int64).reshape(-1, 2)
        self.edge_tris = np.array(edge_tris, dtype=np.int64).reshape(-1, 2)
        self.tri_edges = tri_edges
        self.edge_table = {k: (v, tuple(int(t) for t in self.edge_tris[v] if t >= 0)) for k, v in table.items()}
        bnd = []
        for eid in np.flatnonzero(self.edge_tris[:, 1] < 0):
            t = int(self.edge_tris[eid, 0])
            i, j = self.edges[eid]
            bnd.append((int(i), int(j), t))
        self.boundary_edges = bnd

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def n_edges(self):
        return len(self.edges)

    def areas(self):
        return _signed_areas(self.nodes, self.triangles)

    def jacobians(self):
        """Per-element (jacobian, det, inv_transpose) arrays, vectorised."""
        p = self.nodes[self.triangles]
        J = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=-1)
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        invT = np.empty_like(J)
        invT[:, 0, 0] = J[:, 1, 1] / det
        invT[:, 0, 1] = -J[:, 1, 0] / det
        invT[:, 1, 0] = -J[:, 0, 1] / det
        invT[:, 1, 1] = J[:, 0, 0] / det
        return J, det, invT

    def map_points(self, ref_pts):
        """Physical coordinates of reference points, shape (ntri, npts, 2)."""
        p = self.nodes[self.triangles]
        J, _, _ = self.jacobians()
        return p[:, None, 0, :] + np.einsum("eij,qj->eqi", J, np.atleast_2d(ref_pts))

    def edge_lengths(self):
        d = self.nodes[self.edges[:, 1]] - self.nodes[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    @property
    def h(self):
        """Maximum edge length."""
        return float(self.edge_lengths().max())

    def boundary_segments(self):
        b = np.array([(i, j) for i, j, _ in self.boundary_edges], dtype=np.int64).reshape(-1, 2)
        return self.nodes[b[:, 0]], self.nodes[b[:, 1]]

    def renumbered(self, perm):
        """Copy with node ``i`` moved to position ``perm[i]``."""
        perm = np.asarray(perm)
        nodes = np.empty_like(self.nodes)
        nodes[perm] = self.nodes
        return Mesh(nodes, perm[self.triangles])


def _signed_areas(nodes, tris):
    p = nodes[tris]
    a, b, c = p[:, 0], p[:, 1], p[:, 2]
    return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))


def affine_map(mesh, elem):
    if not 0 <= elem < mesh.n_triangles:
        raise IndexError(f"element {elem} out of range")
    p = mesh.nodes[mesh.triangles[elem]]
    J = np.column_stack([p[1] - p[0], p[2] - p[0]])
    det = float(np.linalg.det(J))
    return AffineMap(J, p[0].copy(), det, np.linalg.inv(J).T)


def generate_square_mesh(n, perturb=0.0, seed=0):
    """Structured triangulation of the unit square with jittered interior nodes.

    Each of the ``n*n`` cells is split along its (0,0)-(1,1) diagonal.
    Interior nodes move by a random offset of length at most ``perturb / n``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= perturb <= 0.3:
        raise ValueError(f"perturb must lie in [0, 0.3], got {perturb}")
    s = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(s, s, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    a = idx[:-1, :-1].ravel()
    b = idx[:-1, 1:].ravel()
    c = idx[1:, 1:].ravel()
    d = idx[1:, :-1].ravel()
    tris = np.empty((2 * n * n, 3), dtype=np.int64)
    tris[0::2] = np.column_stack([a, b, c])
    tris[1::2] = np.column_stack([a, c, d])
    if perturb > 0.0:
        rng = np.random.default_rng(seed)
        interior = idx[1:-1, 1:-1].ravel()
        r = rng.uniform(0.0, perturb / n, size=len(interior))
        theta = rng.uniform(0.0, 2.0 * np.pi, size=len(interior))
        nodes[interior] += np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    return Mesh(nodes, tris)


def load_mesh(text):
    """Parse the plain-text ``nodes``/``triangles`` format."""
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(text.splitlines())]
    lines = [(i, ln) for i, ln in lines if ln and not ln.startswith("#")]
    pos = 0

    def header(word):
        nonlocal pos
        if pos >= len(lines):
            raise MeshError(f"unexpected end of file, expected '{word} <count>'")
        lineno, ln = lines[pos]
        parts = ln.split()
        if len(parts) != 2 or parts[0] != word:
            raise MeshError(f"line {lineno}: expected '{word} <count>', got {ln!r}")
        try:
            count = int(parts[1])
        except ValueError:
            raise MeshError(f"line {lineno}: bad count {parts[1]!r}") from None
        if count < 0:
            raise MeshError(f"line {lineno}: negative count")
        pos += 1
        return count

    def rows(count, width, conv, what):
        nonlocal pos
        out = []
        for _ in range(count):
            if pos >= len(lines):
                raise MeshError(f"unexpected end of file while reading {what}")
            lineno, ln = lines[pos]
            parts = ln.split()
            if len(parts) != width:
                raise MeshError(f"line {lineno}: expected {width} values for {what}, got {len(parts)}")
            try:
                out.append([conv(v) for v in parts])
            except ValueError:
                raise MeshError(f"line {lineno}: cannot parse {what} entry {ln!r}") from None
            pos += 1
        return out, [lines[pos - count + k][0] for k in range(count)]

    nn = header("nodes")
    nodes, _ = rows(nn, 2, float, "node")
    nt = header("triangles")
    tris, tri_lines = rows(nt, 3, int, "triangle")
    if pos != len(lines):
        raise MeshError(f"line {lines[pos][0]}: trailing content")
    nodes = np.array(nodes, dtype=float).reshape(-1, 2)
    for lineno, tri in zip(tri_lines, tris):
        bad = [i for i in tri if not 0 <= i < nn]
        if bad:
            raise MeshError(f"line {lineno}: node index {bad[0]} out of range (mesh has {nn} nodes)")
        if len(set(tri)) < 3:
            raise MeshError(f"line {lineno}: degenerate triangle {tri}")
    tris = np.array(tris, dtype=np.int64).reshape(-1, 3)
    area = _signed_areas(nodes, tris)
    for lineno, a in zip(tri_lines, area):
        if a == 0.0:
            raise MeshError(f"line {lineno}: zero-area triangle")
    return Mesh(nodes, tris)


def dump_mesh(mesh):
    out = [f"nodes {mesh.n_nodes}"]
    out += [f"{x!r} {y!r}" for x, y in mesh.nodes.tolist()]
    out.append(f"triangles {mesh.n_triangles}")
    out += [f"{a} {b} {c}" for a, b, c in mesh.triangles.tolist()]
    return "\n".join(out) + "\n"
