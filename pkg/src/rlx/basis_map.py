"""Centroid-midpoint mapping of edge currents onto panel current vectors.

For panel ``p`` and a contour edge ``e`` the local vector is
``rho = m_e - c_p``. Row ``e`` of the three mapping matrices carries
``+rho`` on the edge's source panel ``i`` and ``-rho`` on its sink panel
``j``, so ``A_t.T @ I_edge`` is the (area-weighted) t-component of the
panel current.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .geometry import EdgeBranch, MeshError, Panel, SurfaceMesh


@dataclass(frozen=True)
class CmMapping:
    A: tuple[sp.csr_matrix, sp.csr_matrix, sp.csr_matrix]
    n_edges: int
    n_panels: int

    @property
    def A1(self):
        return self.A[0]

    @property
    def A2(self):
        return self.A[1]

    @property
    def A3(self):
        return self.A[2]

    def stacked(self) -> sp.csr_matrix:
        """``[A1 A2 A3]`` as one ``N_e x 3N_p`` matrix."""
        return sp.hstack(self.A, format="csr")

    def coo_dump(self) -> str:
        lines = []
        for t, a in enumerate(self.A, start=1):
            c = a.tocoo()
            for r, k, v in zip(c.row, c.col, c.data):
                lines.append(f"A{t} {r} {k} {v!r}")
        return "\n".join(lines)


def local_vector(mesh: SurfaceMesh, panel: int | Panel, edge: EdgeBranch) -> np.ndarray:
    p = mesh.panels[panel] if isinstance(panel, (int, np.integer)) else panel
    vi = p.vertex_indices
    contour = {tuple(sorted((vi[a], vi[(a + 1) % len(vi)]))) for a in range(len(vi))}
    if tuple(sorted(edge.vertices)) not in contour:
        raise MeshError(f"edge {edge.vertices} is not on the panel contour")
    return edge.midpoint - p.centroid


def build_mapping(mesh: SurfaceMesh, edges: list[EdgeBranch]) -> CmMapping:
    n_e, n_p = len(edges), mesh.n_panels
    if n_e == 0:
        empty = sp.csr_matrix((0, n_p))
        return CmMapping((empty, empty.copy(), empty.copy()), 0, n_p)
    c = mesh.centroids
    mid = np.array([e.midpoint for e in edges])
    i = np.array([e.i for e in edges])
    j = np.array([e.j for e in edges])
    # the sink panel's outflow vector points against the edge direction
    vals = np.concatenate([mid - c[i], -(mid - c[j])])
    rows = np.concatenate([np.arange(n_e), np.arange(n_e)])
    cols = np.concatenate([i, j])
    A = tuple(
        sp.csr_matrix((vals[:, t], (rows, cols)), shape=(n_e, n_p)) for t in range(3)
    )
    return CmMapping(A, n_e, n_p)


def panel_current(mapping: CmMapping, edge_currents) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x = np.asarray(edge_currents)
    if x.shape[0] != mapping.n_edges:
        raise ValueError(f"expected {mapping.n_edges} edge currents, got {x.shape[0]}")
    return tuple(a.T @ x for a in mapping.A)


def panel_current_density(mesh: SurfaceMesh, mapping: CmMapping, edge_currents) -> np.ndarray:
    """Reconstructed surface current density per panel, shape ``(N_p, 3)``."""
    comps = panel_current(mapping, edge_currents)
    return np.stack(comps, axis=-1) / mesh.areas[:, None]
