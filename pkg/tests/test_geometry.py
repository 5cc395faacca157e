import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rlx import meshes
from rlx.geometry import (
    INTERIOR, PORT, TERMINAL, ConductorMaterial, MeshError, MeshFormatError, PortSpec,
    build_branch_graph, build_connectivity, build_mesh, count_boundary_edges, format_mesh,
    load_mesh, parse_mesh,
)

CU = "mat cu sigma=5.8e7 thickness=35\n"


def test_unit_square_file():
    m = parse_mesh("unit m\n" + "mat cu sigma=5.8e7 thickness=1e-6\n"
                   "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\np4 0 1 2 3 mat=cu\n")
    assert m.n_panels == 1
    assert m.areas[0] == pytest.approx(1.0)
    np.testing.assert_allclose(m.centroids[0], [0.5, 0.5, 0.0])
    np.testing.assert_allclose(m.normals[0], [0, 0, 1])


def test_two_triangles_euler_count():
    m = meshes.two_triangles()
    assert m.n_panels == 2
    assert len(build_connectivity(m)) == 1
    assert count_boundary_edges(m) == 4


def test_non_manifold_edge_rejected():
    verts = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1)]
    cu = [ConductorMaterial("cu", 5.8e7, 1e-6)]
    with pytest.raises(MeshError, match="non-manifold"):
        build_mesh(verts, [((0, 1, 2), 0), ((0, 1, 3), 0), ((0, 1, 4), 0)], cu)


@pytest.mark.parametrize("bad, msg", [
    ("v 0 0 0\nv 1 0 0\nv 2 0 0\np3 0 1 2 mat=cu\n", "zero area"),
    ("v 0 0 0\nv 1 0 0\np3 0 1 7 mat=cu\n", "out of range"),
    ("v 0 0 0\nv 1 0 0\nv 1.2 1 0\nv 0 1 0\np4 0 1 2 3 mat=cu\n", "parallelogram"),
])
def test_invalid_panels(bad, msg):
    with pytest.raises(MeshError, match=msg):
        parse_mesh("unit um\n" + CU + bad)


def test_parse_error_reports_line():
    with pytest.raises(MeshFormatError) as exc:
        parse_mesh("unit um\n" + CU + "v 0 0\n")
    assert exc.value.lineno == 3


def test_unit_conversion_and_round_trip(tmp_path):
    m = meshes.coil_pair(outer=40e-6, step=10e-6)
    path = tmp_path / "c.msh"
    path.write_text(format_mesh(m))
    back = load_mesh(path)
    np.testing.assert_allclose(back.vertices, m.vertices, rtol=1e-12, atol=1e-18)
    assert back.conductors[0].thickness == pytest.approx(m.conductors[0].thickness)
    assert [p.vertex_indices for p in back.panels] == [p.vertex_indices for p in m.panels]
    assert back.ports == m.ports


def test_box_topology():
    m = meshes.box()
    assert len(build_connectivity(m)) == 12
    assert count_boundary_edges(m) == 0


def test_sheet_edge_count_brute_force():
    m = meshes.sheet(10, 10)
    edges = build_connectivity(m)
    assert len(edges) == 2 * 10 * 9
    # brute force: panels sharing two vertices
    brute = sum(
        len(set(a.vertex_indices) & set(b.vertex_indices)) == 2
        for k, a in enumerate(m.panels) for b in m.panels[k + 1:]
    )
    assert brute == len(edges)


def test_edge_direction_and_midpoint():
    for e in build_connectivity(meshes.sheet(4, 3)):
        assert e.i < e.j
    m = meshes.sheet(4, 3)
    for e in build_connectivity(m):
        np.testing.assert_allclose(e.midpoint, m.vertices[list(e.vertices)].mean(axis=0))


def test_strip_graph_counts():
    m = meshes.strip()
    g = build_branch_graph(m, build_connectivity(m))
    assert g.n_nodes == 4
    assert list(g.kind).count(INTERIOR) == 1
    assert list(g.kind).count(TERMINAL) == 2
    assert list(g.kind).count(PORT) == 1


def test_no_ports_graph():
    m = meshes.sheet(3, 3)
    g = build_branch_graph(m, build_connectivity(m))
    assert g.n_nodes == m.n_panels
    assert g.n_branches == len(build_connectivity(m))


def test_disconnected_port_rejected():
    a = meshes.strip()
    verts = np.vstack([a.vertices, a.vertices + [0, 5, 0]])
    panels = [(p.vertex_indices, 0) for p in a.panels]
    panels += [(tuple(i + len(a.vertices) for i in p.vertex_indices), 0) for p in a.panels]
    m = build_mesh(verts, panels, a.conductors, [PortSpec("X", (0,), (2,))])
    with pytest.raises(MeshError, match="not connected"):
        build_branch_graph(m, build_connectivity(m))


def test_missing_port_panel_rejected():
    a = meshes.strip()
    with pytest.raises(MeshError, match="does not exist"):
        build_mesh(a.vertices, [(p.vertex_indices, 0) for p in a.panels], a.conductors,
                   [PortSpec("X", (0,), (9,))])


def test_shared_sink_uses_one_supernode():
    m = meshes.coil_pair(outer=40e-6, step=10e-6, n_coils=1)
    p = m.ports[0]
    other = next(k for k in range(m.n_panels) if k not in p.positive + p.negative)
    m.ports = [p, PortSpec("Q", p.positive + (other,), p.negative)]
    with pytest.raises(MeshError, match="overlaps"):
        build_branch_graph(m, build_connectivity(m))
    m.ports = [p, PortSpec("Q", p.positive, p.negative)]
    g = build_branch_graph(m, build_connectivity(m))
    assert g.n_nodes == m.n_panels + 2


@pytest.mark.parametrize("name", list(meshes.BUILTIN))
def test_incidence_columns_sum_to_zero(name):
    m = meshes.BUILTIN[name]()
    g = build_branch_graph(m, build_connectivity(m))
    B = g.incidence().toarray()
    assert np.all(B.sum(axis=0) == 0)
    assert np.all((B == 1).sum(axis=0) == 1) and np.all((B == -1).sum(axis=0) == 1)


@pytest.mark.parametrize("name", list(meshes.BUILTIN))
def test_area_sum_matches_raw_vertices(name):
    m = meshes.BUILTIN[name]()
    total = 0.0
    for p in m.panels:
        v = m.vertices[list(p.vertex_indices)]
        # shoelace in 3-D: half the norm of the summed cross products
        s = sum(np.cross(v[k], v[(k + 1) % len(v)]) for k in range(len(v)))
        total += 0.5 * np.linalg.norm(s)
    assert m.areas.sum() == pytest.approx(total, rel=1e-12)


@given(st.integers(1, 6), st.integers(1, 6), st.floats(0.1, 10), st.floats(0.1, 10))
def test_sheet_counts_property(nx, ny, lx, ly):
    m = meshes.sheet(nx, ny, lx, ly)
    assert len(build_connectivity(m)) == nx * (ny - 1) + ny * (nx - 1)
    assert count_boundary_edges(m) == 2 * (nx + ny)
    assert m.areas.sum() == pytest.approx(lx * ly, rel=1e-12)


def test_swapping_panel_order_keeps_magnitudes():
    from rlx.basis_map import build_mapping

    m = meshes.sheet(3, 2)
    rev = build_mesh(m.vertices, [(p.vertex_indices, 0) for p in m.panels[::-1]], m.conductors)
    A = build_mapping(m, build_connectivity(m))
    B = build_mapping(rev, build_connectivity(rev))
    key = lambda mesh, edges: {tuple(sorted(e.vertices)): k for k, e in enumerate(edges)}
    ea, eb = build_connectivity(m), build_connectivity(rev)
    ka, kb = key(m, ea), key(rev, eb)
    n = m.n_panels
    for v, k in ka.items():
        for t in range(3):
            ra = np.sort(np.abs(A.A[t].toarray()[k]))
            rb = np.sort(np.abs(B.A[t].toarray()[kb[v]]))
            np.testing.assert_allclose(ra, rb, atol=1e-15)
    assert n == rev.n_panels
