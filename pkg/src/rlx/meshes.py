"""Built-in test geometries.

Closed conductors use the material thickness ``2*A/P`` of their cross
section (area ``A``, perimeter ``P``): with the double-plane ESI this
reproduces the exact DC resistance of the solid conductor.
"""

from __future__ import annotations

import numpy as np

from .geometry import ConductorMaterial, MeshError, PortSpec, SurfaceMesh, build_mesh

COPPER = 5.8e7


def equivalent_thickness(area: float, perimeter: float) -> float:
    return 2.0 * area / perimeter


def strip(n: int = 2, length: float = 1.0, width: float = 1.0, sigma=COPPER,
          thickness=35e-6, port: bool = True) -> SurfaceMesh:
    """Row of ``n`` coplanar rectangles along x, port from first to last panel."""
    xs = np.linspace(0.0, length, n + 1)
    verts = [(x, y, 0.0) for x in xs for y in (0.0, width)]
    panels = [((2 * i, 2 * i + 2, 2 * i + 3, 2 * i + 1), 0) for i in range(n)]
    ports = [PortSpec("P1", (n - 1,), (0,))] if port and n > 1 else []
    return build_mesh(verts, panels, [ConductorMaterial("cu", sigma, thickness)], ports)


def sheet(nx: int, ny: int, lx: float = 1.0, ly: float = 1.0, sigma=COPPER,
          thickness=35e-6, port: bool = False) -> SurfaceMesh:
    """Structured ``nx`` by ``ny`` rectangle sheet in the z=0 plane.

    Panel ``(ix, iy)`` has index ``ix * ny + iy``. The optional port drives
    the last column against the first.
    """
    xs = np.linspace(0.0, lx, nx + 1)
    ys = np.linspace(0.0, ly, ny + 1)
    vid = lambda i, j: i * (ny + 1) + j
    verts = [(x, y, 0.0) for x in xs for y in ys]
    panels = [
        ((vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)), 0)
        for i in range(nx)
        for j in range(ny)
    ]
    ports = []
    if port:
        ports = [PortSpec("P1", tuple((nx - 1) * ny + j for j in range(ny)), tuple(range(ny)))]
    return build_mesh(verts, panels, [ConductorMaterial("cu", sigma, thickness)], ports)


def two_triangles() -> SurfaceMesh:
    verts = [(0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0)]
    return build_mesh(verts, [((0, 1, 2), 0), ((0, 2, 3), 0)],
                      [ConductorMaterial("cu", COPPER, 35e-6)])


def rectilinear_solid(xs, ys, zs, occupied, materials, cell_material=None,
                      triangulate_z: bool = False) -> tuple[SurfaceMesh, dict]:
    """Boundary surface of a union of grid cells.

    ``occupied[i, j, k]`` marks cell ``[xs[i], xs[i+1]] x ...``. Faces are
    emitted with outward normals; faces normal to z are split into two
    triangles when ``triangulate_z`` is set. Returns the mesh (without
    ports) and a dict mapping ``(i, j, k, axis, side)`` to panel ids.
    """
    xs, ys, zs = (np.asarray(a, dtype=float) for a in (xs, ys, zs))
    occ = np.asarray(occupied, dtype=bool)
    shape = occ.shape
    if cell_material is None:
        cell_material = np.zeros(shape, dtype=int)
    grid = (xs, ys, zs)
    vmap: dict[tuple[int, int, int], int] = {}
    verts = []

    def vertex(ijk):
        if ijk not in vmap:
            vmap[ijk] = len(verts)
            verts.append((xs[ijk[0]], ys[ijk[1]], zs[ijk[2]]))
        return vmap[ijk]

    panels = []
    faces = {}
    for ijk in zip(*np.nonzero(occ)):
        ijk = tuple(int(c) for c in ijk)
        for axis in range(3):
            for side in (0, 1):
                nb = list(ijk)
                nb[axis] += 1 if side else -1
                if 0 <= nb[axis] < shape[axis] and occ[tuple(nb)]:
                    continue
                u, v = [a for a in range(3) if a != axis]
                corners = []
                for du, dv in ((0, 0), (1, 0), (1, 1), (0, 1)):
                    c = list(ijk)
                    c[axis] += side
                    c[u] += du
                    c[v] += dv
                    corners.append(vertex(tuple(c)))
                # (u, v, axis) cyclic gives +axis normal for this corner order
                outward = 1 if side else -1
                if (u, v) == ((axis + 2) % 3, (axis + 1) % 3):
                    outward = -outward
                if outward < 0:
                    corners = corners[::-1]
                mat = int(cell_material[ijk])
                ids = []
                if triangulate_z and axis == 2:
                    a, b, c, d = corners
                    for tri in ((a, b, c), (a, c, d)):
                        ids.append(len(panels))
                        panels.append((tri, mat))
                else:
                    ids.append(len(panels))
                    panels.append((tuple(corners), mat))
                faces[ijk + (axis, side)] = ids
    del grid
    return build_mesh(verts, panels, materials), faces


def box(size: float = 1.0) -> SurfaceMesh:
    """Closed cube of six rectangles."""
    mesh, _ = rectilinear_solid([0, size], [0, size], [0, size], np.ones((1, 1, 1)),
                                [ConductorMaterial("cu", COPPER, size / 3)])
    return mesh


def plate(length=100e-6, width=10e-6, thickness=2e-6, nx=20, ny=4, nz=1,
          sigma=COPPER, triangulate=True) -> SurfaceMesh:
    """Thin closed bar along x with end faces as port terminals."""
    zeta = equivalent_thickness(width * thickness, 2 * (width + thickness))
    mat = ConductorMaterial("cu", sigma, zeta)
    xs = np.linspace(0, length, nx + 1)
    ys = np.linspace(0, width, ny + 1)
    zs = np.linspace(0, thickness, nz + 1)
    mesh, faces = rectilinear_solid(xs, ys, zs, np.ones((nx, ny, nz)), [mat],
                                    triangulate_z=triangulate)
    neg = sorted(p for key, ids in faces.items() if key[3] == 0 and key[4] == 0 and key[0] == 0 for p in ids)
    pos = sorted(p for key, ids in faces.items() if key[3] == 0 and key[4] == 1 and key[0] == nx - 1 for p in ids)
    mesh.ports = [PortSpec("P1", tuple(pos), tuple(neg))]
    return mesh


def wire(radius=5e-6, length=50e-6, n_circ=25, n_axial=20, sigma=5.96e7,
         rim=0.06) -> SurfaceMesh:
    """Faceted round wire along z with triangulated end caps as terminals.

    Each cap is a thin ring of triangles on the rim (relative width
    ``rim``) around a fan, so the terminal adds little series resistance.
    The positive terminal is the cap at ``z = length``.
    """
    if n_circ < 3 or n_axial < 1:
        raise MeshError("wire needs n_circ >= 3 and n_axial >= 1")
    perim = 2 * n_circ * radius * np.sin(np.pi / n_circ)
    zeta = 2 * np.pi * radius**2 / perim  # DC resistance of the round wire
    mat = ConductorMaterial("cu", sigma, zeta)
    th = 2 * np.pi * np.arange(n_circ) / n_circ
    zs = np.linspace(0.0, length, n_axial + 1)
    verts = [(radius * np.cos(t), radius * np.sin(t), z) for z in zs for t in th]
    ring = lambda a, i: a * n_circ + i % n_circ
    panels = []
    for a in range(n_axial):
        for i in range(n_circ):
            panels.append(((ring(a, i), ring(a, i + 1), ring(a + 1, i + 1), ring(a + 1, i)), 0))
    inner_r = radius * np.cos(np.pi / n_circ) * (1 - rim)
    caps = []
    for z, level, outward in ((0.0, 0, -1), (length, n_axial, 1)):
        first = len(panels)
        base = len(verts)
        for i in range(n_circ):
            t = th[i] + np.pi / n_circ
            verts.append((inner_r * np.cos(t), inner_r * np.sin(t), z))
        centre = len(verts)
        verts.append((0.0, 0.0, z))
        tris = []
        for i in range(n_circ):
            o0, o1 = ring(level, i), ring(level, i + 1)
            inn, inn_prev = base + i, base + (i - 1) % n_circ
            tris.append((o0, o1, inn))          # rim triangle on the outer edge
            tris.append((inn_prev, o0, inn))     # gap triangle at the outer vertex
            tris.append((centre, inn, inn_prev)[::-1])
        for t in tris:
            # orient outward (+z at the top cap, -z at the bottom)
            p = np.array([verts[k] for k in t])
            nz = np.cross(p[1] - p[0], p[2] - p[0])[2]
            panels.append((t if nz * outward > 0 else t[::-1], 0))
        caps.append(tuple(range(first, len(panels))))
    return build_mesh(verts, panels, [mat], [PortSpec("P1", caps[1], caps[0])])


def _coil_grid(outer, width, step, gap, gap_at):
    """Grid lines along one in-plane axis of a square coil."""
    lines = {0.0, width, outer - width, outer}
    n = max(1, int(round((outer - 2 * width) / step)))
    lines.update(np.linspace(width, outer - width, n + 1).tolist())
    if gap_at is not None:
        lo, hi = gap_at - gap / 2, gap_at + gap / 2
        lines = {x for x in lines if not lo - 0.3 * step < x < hi + 0.3 * step}
        lines.update((lo, hi))
    return np.array(sorted(lines))


def coil_pair(outer=100e-6, width=5e-6, height=5e-6, spacing=5e-6, gap=2e-6,
              step=5e-6, sigma=5.96e7, triangulate=True, n_coils=2,
              width_cells=1) -> SurfaceMesh:
    """Stacked square single-turn coils with a source/sink gap each.

    Coil ``q`` occupies ``z`` in ``[q*(height+spacing), q*(height+spacing)+height]``.
    The gap is centred on the ``y = 0`` side; port ``P{q+1}`` drives the
    gap face at larger x (positive) against the one at smaller x.
    """
    gx = outer / 2
    xs = _coil_grid(outer, width, step, gap, gx)
    ys = _coil_grid(outer, width, step, gap, None)
    if width_cells > 1:
        extra = [np.linspace(a, b, width_cells + 1)[1:-1] for a, b in ((0, width), (outer - width, outer))]
        xs = np.unique(np.concatenate([xs, *extra]))
        ys = np.unique(np.concatenate([ys, *extra]))
    zs = []
    for q in range(n_coils):
        z0 = q * (height + spacing)
        zs += [z0, z0 + height]
    zs = np.array(zs)
    cx = 0.5 * (xs[1:] + xs[:-1])
    cy = 0.5 * (ys[1:] + ys[:-1])
    in_ring = ((cx[:, None] < width) | (cx[:, None] > outer - width)
               | (cy[None, :] < width) | (cy[None, :] > outer - width))
    cut = (np.abs(cx[:, None] - gx) < gap / 2) & (cy[None, :] < width)
    foot = in_ring & ~cut
    occ = np.zeros((len(cx), len(cy), len(zs) - 1), dtype=bool)
    for q in range(n_coils):
        occ[:, :, 2 * q] = foot
    zeta = equivalent_thickness(width * height, 2 * (width + height))
    mesh, faces = rectilinear_solid(xs, ys, zs, occ, [ConductorMaterial("cu", sigma, zeta)],
                                    triangulate_z=triangulate)
    ix_lo = int(np.searchsorted(xs, gx - gap / 2)) - 1  # cell left of the gap
    ix_hi = ix_lo + 2
    ports = []
    for q in range(n_coils):
        pos = sorted(p for key, ids in faces.items()
                     if key[0] == ix_hi and key[2] == 2 * q and key[3] == 0 and key[4] == 0 for p in ids)
        neg = sorted(p for key, ids in faces.items()
                     if key[0] == ix_lo and key[2] == 2 * q and key[3] == 0 and key[4] == 1 for p in ids)
        ports.append(PortSpec(f"P{q + 1}", tuple(pos), tuple(neg)))
    mesh.ports = ports
    return mesh


def coil_centerline(outer=100e-6, width=5e-6, z=2.5e-6, gap=2e-6) -> np.ndarray:
    """Open polyline along the coil centre, from the positive gap face around to the negative."""
    a, b = width / 2, outer - width / 2
    g = outer / 2
    return np.array([
        (g + gap / 2, a, z), (b, a, z), (b, b, z), (a, b, z), (a, a, z), (g - gap / 2, a, z),
    ])


BUILTIN = {
    "strip": lambda: strip(2),
    "sheet-port": lambda: sheet(6, 3, 6e-6, 3e-6, port=True),
    "plate": lambda: plate(nx=10, ny=2),
    "wire-coarse": lambda: wire(n_circ=7, n_axial=6),
    "coils-coarse": lambda: coil_pair(outer=40e-6, step=10e-6, spacing=5e-6),
}
