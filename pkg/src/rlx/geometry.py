"""Surface meshes, edge connectivity and the PEEC branch graph.

Panels are circuit nodes (their centroids), interior edges are branches
between the two adjacent panels. Ports attach through terminal
super-nodes joined to their panels by zero-impedance branches.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

logger = logging.getLogger(__name__)

UNIT_SCALE = {"m": 1.0, "mm": 1e-3, "um": 1e-6}
RECT_TOL = 1e-9


class MeshError(ValueError):
    """Invalid mesh topology, geometry or port definition."""


class MeshFormatError(MeshError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


@dataclass(frozen=True)
class ConductorMaterial:
    name: str
    sigma: float
    thickness: float

    def __post_init__(self):
        if not (self.sigma > 0 and self.thickness > 0):
            raise MeshError(
                f"material {self.name!r}: sigma and thickness must be positive"
            )


@dataclass(frozen=True)
class Panel:
    vertex_indices: tuple[int, ...]
    conductor_id: int
    centroid: np.ndarray
    area: float
    unit_normal: np.ndarray

    @property
    def is_triangle(self) -> bool:
        return len(self.vertex_indices) == 3


@dataclass(frozen=True)
class PortSpec:
    name: str
    positive: tuple[int, ...]
    negative: tuple[int, ...]


@dataclass(frozen=True)
class EdgeBranch:
    """Interior edge shared by panels ``i < j``; reference current i -> j."""

    edge_id: int
    vertices: tuple[int, int]
    midpoint: np.ndarray
    i: int
    j: int


@dataclass
class SurfaceMesh:
    vertices: np.ndarray
    panels: list[Panel]
    conductors: list[ConductorMaterial]
    ports: list[PortSpec] = field(default_factory=list)

    @property
    def n_panels(self) -> int:
        return len(self.panels)

    @property
    def centroids(self) -> np.ndarray:
        return np.array([p.centroid for p in self.panels]).reshape(-1, 3)

    @property
    def areas(self) -> np.ndarray:
        return np.array([p.area for p in self.panels], dtype=float)

    @property
    def normals(self) -> np.ndarray:
        return np.array([p.unit_normal for p in self.panels]).reshape(-1, 3)

    @property
    def conductor_ids(self) -> np.ndarray:
        return np.array([p.conductor_id for p in self.panels], dtype=int)

    def panel_vertices(self, k: int) -> np.ndarray:
        return self.vertices[list(self.panels[k].vertex_indices)]

    def port(self, name: str) -> PortSpec:
        for p in self.ports:
            if p.name == name:
                return p
        raise KeyError(f"unknown port {name!r}")


def make_panel(vertices: np.ndarray, idx, conductor_id: int) -> Panel:
    """Build a panel and its derived quantities, validating the shape."""
    idx = tuple(int(i) for i in idx)
    if len(idx) not in (3, 4):
        raise MeshError(f"panel {idx}: needs 3 or 4 vertices")
    if len(set(idx)) != len(idx):
        raise MeshError(f"panel {idx}: repeated vertex index")
    n = len(vertices)
    if any(i < 0 or i >= n for i in idx):
        raise MeshError(f"panel {idx}: vertex index out of range")
    pts = vertices[list(idx)]
    if len(idx) == 3:
        cross = np.cross(pts[1] - pts[0], pts[2] - pts[0])
        area = 0.5 * np.linalg.norm(cross)
        centroid = pts.mean(axis=0)
    else:
        a, b, c, d = pts
        scale = max(np.linalg.norm(b - a), np.linalg.norm(d - a))
        # parallelogram: diagonals bisect each other
        if np.linalg.norm((a + c) - (b + d)) > RECT_TOL * scale:
            raise MeshError(f"panel {idx}: quad is not a planar parallelogram")
        cross = np.cross(b - a, d - a)
        area = np.linalg.norm(cross)
        centroid = 0.5 * (a + c)
    if not area > 0:
        raise MeshError(f"panel {idx}: zero area")
    return Panel(idx, int(conductor_id), centroid, float(area), cross / np.linalg.norm(cross))


def build_mesh(vertices, panels, conductors, ports=()) -> SurfaceMesh:
    """Assemble and validate a mesh from raw arrays.

    ``panels`` is a sequence of ``(vertex_indices, conductor_id)``.
    """
    vertices = np.asarray(vertices, dtype=float).reshape(-1, 3)
    if not np.all(np.isfinite(vertices)):
        raise MeshError("non-finite vertex coordinate")
    plist = []
    for k, (idx, cid) in enumerate(panels):
        if not 0 <= cid < len(conductors):
            raise MeshError(f"panel {k}: invalid conductor index {cid}")
        try:
            plist.append(make_panel(vertices, idx, cid))
        except MeshError as exc:
            raise MeshError(f"panel {k}: {exc}") from None
    mesh = SurfaceMesh(vertices, plist, list(conductors), [])
    edge_panels(mesh)  # manifold check
    for port in ports:
        _check_port(mesh, port)
    mesh.ports = list(ports)
    return mesh


def _check_port(mesh: SurfaceMesh, port: PortSpec):
    pos, neg = set(port.positive), set(port.negative)
    if not pos or not neg:
        raise MeshError(f"port {port.name!r}: empty terminal")
    if pos & neg:
        raise MeshError(f"port {port.name!r}: terminals overlap")
    for k in pos | neg:
        if not 0 <= k < mesh.n_panels:
            raise MeshError(f"port {port.name!r}: panel {k} does not exist")


def edge_panels(mesh: SurfaceMesh) -> dict[tuple[int, int], list[int]]:
    """Map each undirected vertex pair to the panels bordering it.

    Raises on edges shared by more than two panels.
    """
    table: dict[tuple[int, int], list[int]] = {}
    for k, p in enumerate(mesh.panels):
        vi = p.vertex_indices
        for a in range(len(vi)):
            key = tuple(sorted((vi[a], vi[(a + 1) % len(vi)])))
            table.setdefault(key, []).append(k)
    for key, owners in table.items():
        if len(owners) > 2:
            raise MeshError(f"non-manifold edge {key} shared by panels {owners}")
        if len(owners) == 2 and owners[0] == owners[1]:
            raise MeshError(f"edge {key} used twice by panel {owners[0]}")
    return table


def build_connectivity(mesh: SurfaceMesh) -> list[EdgeBranch]:
    """One branch per interior edge, directed from lower to higher panel index."""
    edges = []
    for key, owners in sorted(edge_panels(mesh).items()):
        if len(owners) != 2:
            continue
        i, j = sorted(owners)
        mid = 0.5 * (mesh.vertices[key[0]] + mesh.vertices[key[1]])
        edges.append(EdgeBranch(len(edges), key, mid, i, j))
    logger.debug("connectivity: N_p=%d N_e=%d", mesh.n_panels, len(edges))
    return edges


def count_boundary_edges(mesh: SurfaceMesh) -> int:
    return sum(1 for owners in edge_panels(mesh).values() if len(owners) == 1)


INTERIOR, TERMINAL, PORT = 0, 1, 2


@dataclass(frozen=True)
class BranchGraph:
    """Node/branch graph: panel nodes first, then terminal super-nodes.

    Branch order: interior edges (same order as the edge list), terminal
    branches (super-node -> panel), port branches (negative super-node ->
    positive super-node, the direction the source drives current).
    """

    n_panels: int
    n_nodes: int
    tail: np.ndarray
    head: np.ndarray
    kind: np.ndarray
    n_edges: int
    port_names: tuple[str, ...]
    port_branch: np.ndarray
    terminal_nodes: tuple[tuple[int, int], ...]  # (positive, negative) per port

    @property
    def n_branches(self) -> int:
        return len(self.tail)

    def incidence(self) -> sp.csr_matrix:
        """Node-branch incidence: +1 at the tail node, -1 at the head node."""
        nb = self.n_branches
        cols = np.concatenate([np.arange(nb), np.arange(nb)])
        rows = np.concatenate([self.tail, self.head])
        vals = np.concatenate([np.ones(nb, dtype=int), -np.ones(nb, dtype=int)])
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n_nodes, nb))

    def terminal_branches(self, node: int) -> np.ndarray:
        return np.flatnonzero((self.kind == TERMINAL) & (self.tail == node))


def panel_components(mesh: SurfaceMesh, edges: list[EdgeBranch]) -> np.ndarray:
    n = mesh.n_panels
    if not edges:
        return np.arange(n)
    i = np.array([e.i for e in edges])
    j = np.array([e.j for e in edges])
    adj = sp.coo_matrix((np.ones(len(i)), (i, j)), shape=(n, n))
    return connected_components(adj, directed=False)[1]


def build_branch_graph(mesh: SurfaceMesh, edges: list[EdgeBranch]) -> BranchGraph:
    n_p = mesh.n_panels
    comp = panel_components(mesh, edges)
    tail = [e.i for e in edges]
    head = [e.j for e in edges]
    kind = [INTERIOR] * len(edges)

    # identical terminal sets (e.g. a shared sink) share one super-node
    supernode: dict[frozenset, int] = {}
    terminals = []
    for port in mesh.ports:
        _check_port(mesh, port)
        pair = []
        for members in (port.positive, port.negative):
            key = frozenset(members)
            for other in supernode:
                if other != key and other & key:
                    raise MeshError(
                        f"port {port.name!r}: terminal overlaps another terminal"
                    )
            if key not in supernode:
                supernode[key] = n_p + len(supernode)
            pair.append(supernode[key])
        ids = np.array(sorted(set(port.positive) | set(port.negative)))
        if len(set(comp[ids])) != 1:
            raise MeshError(
                f"port {port.name!r}: terminals are not connected by conductor"
            )
        terminals.append(tuple(pair))

    for key, node in supernode.items():
        for k in sorted(key):
            tail.append(node)
            head.append(k)
            kind.append(TERMINAL)
    port_branch = []
    for pos, neg in terminals:
        port_branch.append(len(tail))
        tail.append(neg)
        head.append(pos)
        kind.append(PORT)

    return BranchGraph(
        n_panels=n_p,
        n_nodes=n_p + len(supernode),
        tail=np.array(tail, dtype=int),
        head=np.array(head, dtype=int),
        kind=np.array(kind, dtype=int),
        n_edges=len(edges),
        port_names=tuple(p.name for p in mesh.ports),
        port_branch=np.array(port_branch, dtype=int),
        terminal_nodes=tuple(terminals),
    )


# -- text format -----------------------------------------------------------


def _parse_ids(text: str, lineno: int) -> tuple[int, ...]:
    try:
        ids = tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise MeshFormatError(lineno, f"bad panel id list {text!r}") from None
    if not ids:
        raise MeshFormatError(lineno, "empty panel id list")
    return ids


def parse_mesh(text: str) -> SurfaceMesh:
    scale = None
    verts, panels, mats, ports = [], [], [], []
    mat_index: dict[str, int] = {}
    port_lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        key = tok[0]
        try:
            if key == "unit":
                if len(tok) != 2 or tok[1] not in UNIT_SCALE:
                    raise MeshFormatError(lineno, f"unit must be one of {list(UNIT_SCALE)}")
                scale = UNIT_SCALE[tok[1]]
                continue
            if scale is None:
                raise MeshFormatError(lineno, "'unit' header must come first")
            if key == "v":
                if len(tok) != 4:
                    raise MeshFormatError(lineno, "vertex needs 3 coordinates")
                verts.append([float(t) * scale for t in tok[1:]])
            elif key == "mat":
                kv = dict(t.split("=", 1) for t in tok[2:])
                if set(kv) != {"sigma", "thickness"}:
                    raise MeshFormatError(lineno, "mat needs sigma= and thickness=")
                if tok[1] in mat_index:
                    raise MeshFormatError(lineno, f"duplicate material {tok[1]!r}")
                mat_index[tok[1]] = len(mats)
                try:
                    mats.append(
                        ConductorMaterial(tok[1], float(kv["sigma"]), float(kv["thickness"]) * scale)
                    )
                except MeshError as exc:
                    raise MeshFormatError(lineno, str(exc)) from None
            elif key in ("p3", "p4"):
                nv = 3 if key == "p3" else 4
                if len(tok) != nv + 2 or not tok[-1].startswith("mat="):
                    raise MeshFormatError(lineno, f"{key} needs {nv} indices and mat=<name>")
                name = tok[-1][4:]
                if name not in mat_index:
                    raise MeshFormatError(lineno, f"unknown material {name!r}")
                panels.append((tuple(int(t) for t in tok[1 : nv + 1]), mat_index[name]))
            elif key == "port":
                if len(tok) != 4 or not tok[2].startswith("+=") or not tok[3].startswith("-="):
                    raise MeshFormatError(lineno, "port needs +=<ids> -=<ids>")
                port_lines.append(
                    PortSpec(tok[1], _parse_ids(tok[2][2:], lineno), _parse_ids(tok[3][2:], lineno))
                )
            else:
                raise MeshFormatError(lineno, f"unknown record {key!r}")
        except ValueError as exc:
            if isinstance(exc, MeshFormatError):
                raise
            raise MeshFormatError(lineno, str(exc)) from None
    if scale is None:
        raise MeshFormatError(0, "missing 'unit' header")
    names = [p.name for p in port_lines]
    if len(set(names)) != len(names):
        raise MeshError("duplicate port name")
    return build_mesh(verts, panels, mats, port_lines)


def load_mesh(path) -> SurfaceMesh:
    return parse_mesh(Path(path).read_text())


def format_mesh(mesh: SurfaceMesh, unit: str = "um") -> str:
    s = UNIT_SCALE[unit]
    out = [f"unit {unit}"]
    for m in mesh.conductors:
        out.append(f"mat {m.name} sigma={m.sigma!r} thickness={m.thickness / s!r}")
    for v in mesh.vertices:
        out.append("v " + " ".join(repr(float(c / s)) for c in v))
    for p in mesh.panels:
        tag = "p3" if p.is_triangle else "p4"
        ids = " ".join(str(i) for i in p.vertex_indices)
        out.append(f"{tag} {ids} mat={mesh.conductors[p.conductor_id].name}")
    for port in mesh.ports:
        pos = ",".join(map(str, port.positive))
        neg = ",".join(map(str, port.negative))
        out.append(f"port {port.name} +={pos} -={neg}")
    return "\n".join(out) + "\n"


def write_mesh(mesh: SurfaceMesh, path, unit: str = "um"):
    Path(path).write_text(format_mesh(mesh, unit))
