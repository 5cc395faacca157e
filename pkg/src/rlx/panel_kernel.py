"""Scalar-potential panel interactions for pulse bases normalised by area.

``P[k, l] = 1/(A_k A_l) * int_k int_l dS dS' / |r - r'|``.

The inner integral over a flat polygon is evaluated in closed form. The
outer integral uses:

* self terms: the exact reduction to a boundary integral
  ``I = 2/3 * sum_e h_e int_e V dl`` (the double integral is homogeneous
  of degree 3 under scaling), with graded Gauss-Legendre points per edge;
* touching pairs (sharing a vertex): 7-point Gauss on triangles, 2x2 on
  parallelograms;
* other near pairs: the observer panel's centroid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .geometry import MeshError, Panel, SurfaceMesh

_CHUNK = 200_000

# Dunavant degree-5 rule, barycentric coordinates and weights summing to 1
_A1, _B1 = 0.059715871789770, 0.470142064105115
_A2, _B2 = 0.797426985353087, 0.101286507323456
TRI7_BARY = np.array([
    [1 / 3, 1 / 3, 1 / 3],
    [_A1, _B1, _B1], [_B1, _A1, _B1], [_B1, _B1, _A1],
    [_A2, _B2, _B2], [_B2, _A2, _B2], [_B2, _B2, _A2],
])
TRI7_W = np.array([0.225] + [0.132394152788506] * 3 + [0.125939180544827] * 3)

_g = (1 + np.array([-1, 1]) / np.sqrt(3)) / 2
QUAD4_ST = np.array([(s, t) for s in _g for t in _g])
QUAD4_W = np.full(4, 0.25)


def _graded_edge_rule(n=16):
    # sigmoidal map t^2/(t^2+(1-t)^2) clusters points at both vertices
    g, w = np.polynomial.legendre.leggauss(n)
    t, w = (g + 1) / 2, w / 2
    den = t**2 + (1 - t) ** 2
    return t**2 / den, w * 2 * t * (1 - t) / den**2


EDGE_S, EDGE_W = _graded_edge_rule()


def polygon_potential(poly: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``int_S dS'/|x - r'|`` for flat polygons ``poly`` (M, nv, 3) at points ``x`` (M, 3).

    Vertices must be ordered counter-clockwise about the polygon normal.
    Valid for observers on, near or far from the polygon.
    """
    poly = np.asarray(poly, dtype=float)
    x = np.asarray(x, dtype=float)
    nv = poly.shape[1]
    n = np.cross(poly[:, 1] - poly[:, 0], poly[:, 2] - poly[:, 0])
    n /= np.linalg.norm(n, axis=1)[:, None]
    d = np.einsum("ij,ij->i", x - poly[:, 0], n)
    ad = np.abs(d)
    rho = x - d[:, None] * n
    total = np.zeros(len(x))
    for i in range(nv):
        a, b = poly[:, i], poly[:, (i + 1) % nv]
        length = np.linalg.norm(b - a, axis=1)
        t = (b - a) / length[:, None]
        u = np.cross(t, n)
        p0 = np.einsum("ij,ij->i", a - rho, u)
        lm = np.einsum("ij,ij->i", a - rho, t)
        lp = np.einsum("ij,ij->i", b - rho, t)
        r02 = p0 * p0 + d * d
        rm = np.sqrt(r02 + lm * lm)
        rp = np.sqrt(r02 + lp * lp)
        on_line = np.abs(p0) <= 1e-13 * length
        with np.errstate(divide="ignore", invalid="ignore"):
            # R + l without cancellation when l < 0
            num = np.where(lp >= 0, rp + lp, r02 / (rp - lp))
            den = np.where(lm >= 0, rm + lm, r02 / (rm - lm))
            log_term = np.where(on_line, 0.0, np.log(num / den))
        total += np.where(on_line, 0.0, p0 * log_term)
        total -= ad * (np.arctan2(p0 * lp, r02 + ad * rp) - np.arctan2(p0 * lm, r02 + ad * rm))
    return total


def potential_integral(mesh_or_verts, panel: Panel | None = None, point=None) -> float:
    """Area-normalised potential ``(1/A) int_S dS'/|x - r'|`` of one panel.

    Accepts either ``(mesh, panel, point)`` or ``(vertices, point)`` with
    vertices an (nv, 3) array.
    """
    if panel is None:
        verts, point = np.asarray(mesh_or_verts, dtype=float), point
        area = _area(verts)
    else:
        verts = mesh_or_verts.vertices[list(panel.vertex_indices)]
        area = panel.area
    if not area > 0:
        raise MeshError("degenerate panel")
    return float(polygon_potential(verts[None], np.asarray(point, dtype=float)[None])[0] / area)


def _area(verts):
    if len(verts) == 3:
        return 0.5 * np.linalg.norm(np.cross(verts[1] - verts[0], verts[2] - verts[0]))
    return np.linalg.norm(np.cross(verts[1] - verts[0], verts[3] - verts[0]))


@dataclass(frozen=True)
class PanelArrays:
    """Padded per-panel geometry used by the vectorised kernels."""

    vidx: np.ndarray  # (N, 4) vertex indices, -1 padded
    poly: np.ndarray  # (N, 4, 3); triangles repeat their last vertex
    nv: np.ndarray
    centroid: np.ndarray
    area: np.ndarray

    @classmethod
    def from_mesh(cls, mesh: SurfaceMesh) -> "PanelArrays":
        n = mesh.n_panels
        vidx = np.full((n, 4), -1, dtype=int)
        nv = np.array([len(p.vertex_indices) for p in mesh.panels], dtype=int)
        for k, p in enumerate(mesh.panels):
            vidx[k, : nv[k]] = p.vertex_indices
        filled = np.where(vidx >= 0, vidx, vidx[:, [2]])
        return cls(vidx, mesh.vertices[filled], nv, mesh.centroids, mesh.areas)


def _potential_batch(pa: PanelArrays, src: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Unnormalised potential of panels ``src`` at points ``x``."""
    out = np.empty(len(src))
    for nv in (3, 4):
        sel = np.flatnonzero(pa.nv[src] == nv)
        for s in range(0, len(sel), _CHUNK):
            part = sel[s : s + _CHUNK]
            out[part] = polygon_potential(pa.poly[src[part], :nv], x[part])
    return out


def _outer_rule(pa: PanelArrays, k: np.ndarray):
    """Gauss points (len(k), 7, 3) and weights (len(k), 7) on panels ``k``.

    Quads pad their 4-point rule with zero weights.
    """
    pts = np.zeros((len(k), 7, 3))
    wts = np.zeros((len(k), 7))
    tri = pa.nv[k] == 3
    if tri.any():
        P = pa.poly[k[tri], :3]
        pts[tri] = np.einsum("qa,nac->nqc", TRI7_BARY, P)
        wts[tri] = TRI7_W
    if (~tri).any():
        P = pa.poly[k[~tri]]
        a, b, d = P[:, 0], P[:, 1], P[:, 3]
        s, t = QUAD4_ST[:, 0], QUAD4_ST[:, 1]
        pts[~tri, :4] = (a[:, None] + s[None, :, None] * (b - a)[:, None]
                         + t[None, :, None] * (d - a)[:, None])
        wts[~tri, :4] = QUAD4_W
    return pts, wts


def self_terms(pa: PanelArrays, k: np.ndarray | None = None) -> np.ndarray:
    """Exact-to-quadrature self entries ``P[k, k]``."""
    if k is None:
        k = np.arange(len(pa.nv))
    out = np.zeros(len(k))
    ng = len(EDGE_S)
    for e in range(4):
        has = pa.nv[k] > e
        kk = k[has]
        if len(kk) == 0:
            continue
        nv = pa.nv[kk]
        a = pa.poly[kk, e]
        b = pa.poly[kk, (e + 1) % 4]
        b = np.where((nv == 3)[:, None] & (e == 2), pa.poly[kk, 0], b)
        length = np.linalg.norm(b - a, axis=1)
        n = np.cross(pa.poly[kk, 1] - pa.poly[kk, 0], pa.poly[kk, 2] - pa.poly[kk, 0])
        n /= np.linalg.norm(n, axis=1)[:, None]
        u = np.cross((b - a) / length[:, None], n)
        h = np.einsum("ij,ij->i", a - pa.centroid[kk], u)
        pts = a[:, None] + EDGE_S[None, :, None] * (b - a)[:, None]
        src = np.repeat(kk, ng)
        V = _potential_batch(pa, src, pts.reshape(-1, 3)).reshape(-1, ng)
        out[has] += h * length * (V @ EDGE_W)
    return (2.0 / 3.0) * out / pa.area[k] ** 2


def touching(pa: PanelArrays, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    vi, vj = pa.vidx[i], pa.vidx[j]
    eq = (vi[:, :, None] == vj[:, None, :]) & (vi[:, :, None] >= 0)
    return eq.any(axis=(1, 2))


def pair_entries(pa: PanelArrays, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """``P[i, j]`` for index arrays; the outer integral runs over panel ``i``."""
    i = np.asarray(i, dtype=int)
    j = np.asarray(j, dtype=int)
    out = np.empty(len(i))
    same = i == j
    if same.any():
        out[same] = self_terms(pa, i[same])
    other = np.flatnonzero(~same)
    touch = touching(pa, i[other], j[other])
    t_idx, f_idx = other[touch], other[~touch]
    if len(t_idx):
        pts, wts = _outer_rule(pa, i[t_idx])
        src = np.repeat(j[t_idx], 7)
        V = _potential_batch(pa, src, pts.reshape(-1, 3)).reshape(-1, 7)
        out[t_idx] = np.einsum("nq,nq->n", V, wts) / pa.area[j[t_idx]]
    if len(f_idx):
        V = _potential_batch(pa, j[f_idx], pa.centroid[i[f_idx]])
        out[f_idx] = V / pa.area[j[f_idx]]
    return out


def pair_entry(mesh: SurfaceMesh, k: int, l: int) -> float:
    """Single entry, computed with the lower index as the outer panel."""
    a, b = min(k, l), max(k, l)
    pa = PanelArrays.from_mesh(mesh)
    return float(pair_entries(pa, np.array([a]), np.array([b]))[0])


@dataclass(frozen=True)
class NearFieldBlock:
    P: sp.csr_matrix
    n_pairs: int

    @property
    def diagonal(self) -> np.ndarray:
        return self.P.diagonal()

    @property
    def nnz(self) -> int:
        return self.P.nnz


def assemble_near_field(mesh: SurfaceMesh, pairs: np.ndarray | None = None,
                        panels: PanelArrays | None = None) -> NearFieldBlock:
    """Sparse symmetric near block from unordered pairs ``(i, j)``, ``i <= j``.

    ``pairs=None`` assembles the dense matrix (every pair is near).
    """
    n = mesh.n_panels
    pa = panels or PanelArrays.from_mesh(mesh)
    if pairs is None:
        i, j = np.triu_indices(n)
    else:
        pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
        i, j = np.minimum(pairs[:, 0], pairs[:, 1]), np.maximum(pairs[:, 0], pairs[:, 1])
    vals = pair_entries(pa, i, j)
    off = i != j
    rows = np.concatenate([i, j[off]])
    cols = np.concatenate([j, i[off]])
    data = np.concatenate([vals, vals[off]])
    P = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    return NearFieldBlock(P, len(i))


def dense_P(mesh: SurfaceMesh) -> np.ndarray:
    return assemble_near_field(mesh).P.toarray()
