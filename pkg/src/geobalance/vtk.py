"""Legacy ASCII VTK output of (u, eta) snapshots."""
import numpy as np

from . import spaces
from .elements import lattice_points


def visualization_cells(k):
    """Sub-triangles (as local DOF indices) of the degree-``k`` lattice."""
    if k == 0:
        return np.array([[0, 0, 0]])
    index = {p: i for i, p in enumerate(lattice_points(k))}
    cells = []
    for j in range(k):
        for i in range(k - j):
            cells.append((index[(i, j)], index[(i + 1, j)], index[(i, j + 1)]))
            if i + j <= k - 2:
                cells.append((index[(i + 1, j)], index[(i + 1, j + 1)], index[(i, j + 1)]))
    return np.array(cells)


def write_vtk(fh, pair, state, title="geobalance snapshot"):
    """Write eta as point data on the P1 refinement of H, u as cell data."""
    H = pair.H
    k = H.degree
    local = visualization_cells(k)
    cells = H.dof_map[:, local].reshape(-1, 3)
    # centroids of sub-triangles in reference coordinates
    ref = np.array(lattice_points(k), dtype=float) / k
    centroids = ref[local].mean(axis=1)
    uc = spaces.element_values(pair.V, state.u, centroids).reshape(-1, 2)

    w = fh.write
    w("# vtk DataFile Version 2.0\n")
    w(f"{title}, t={state.time!r}\n")
    w("ASCII\nDATASET UNSTRUCTURED_GRID\n")
    w(f"POINTS {H.ndof} double\n")
    for x, y in H.dof_coords.tolist():
        w(f"{x!r} {y!r} 0.0\n")
    w(f"CELLS {len(cells)} {4 * len(cells)}\n")
    for a, b, c in cells.tolist():
        w(f"3 {a} {b} {c}\n")
    w(f"CELL_TYPES {len(cells)}\n")
    w("5\n" * len(cells))
    w(f"POINT_DATA {H.ndof}\nSCALARS eta double 1\nLOOKUP_TABLE default\n")
    for v in state.eta.tolist():
        w(f"{v!r}\n")
    w(f"CELL_DATA {len(cells)}\nVECTORS u double\n")
    for ux, uy in uc.tolist():
        w(f"{ux!r} {uy!r} 0.0\n")


def read_vtk(text):
    """Parse files produced by :func:`write_vtk` into plain arrays."""
    tok = text.split("\n")
    out = {}
    i = 4
    while i < len(tok):
        parts = tok[i].split()
        if not parts:
            i += 1
            continue
        key = parts[0]
        if key == "POINTS":
            n = int(parts[1])
            out["points"] = np.array([tok[i + 1 + r].split() for r in range(n)], dtype=float)
            i += n + 1
        elif key == "CELLS":
            n = int(parts[1])
            out["cells"] = np.array([tok[i + 1 + r].split()[1:] for r in range(n)], dtype=np.int64)
            i += n + 1
        elif key == "CELL_TYPES":
            i += int(parts[1]) + 1
        elif key == "POINT_DATA":
            n = int(parts[1])
            out["eta"] = np.array(tok[i + 3: i + 3 + n], dtype=float)
            i += n + 3
        elif key == "CELL_DATA":
            n = int(parts[1])
            out["u"] = np.array([tok[i + 2 + r].split() for r in range(n)], dtype=float)[:, :2]
            i += n + 2
        else:
            raise ValueError(f"unexpected VTK line {tok[i]!r}")
    return out
