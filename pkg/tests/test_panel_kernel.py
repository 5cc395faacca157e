import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate
from scipy.spatial.transform import Rotation

from rlx import meshes
from rlx.geometry import build_mesh
from rlx.panel_kernel import (
    PanelArrays, assemble_near_field, dense_P, pair_entries, pair_entry, polygon_potential,
    potential_integral, self_terms,
)

# closed form of int int dS dS'/|r - r'| over the unit square
UNIT_SQUARE_SELF = 2.9732095982473785


def _polar_potential(poly2d, x, z):
    """Oracle: potential of a convex polygon in the z=0 plane at (x, z).

    In polar coordinates about the projected observer the radial integral
    is exact: int_0^R rho/sqrt(rho^2+z^2) drho = sqrt(R^2+z^2) - |z|.
    """
    poly2d = np.asarray(poly2d, float)
    ang = np.arctan2(poly2d[:, 1] - x[1], poly2d[:, 0] - x[0])

    def R(t):
        d = np.array([np.cos(t), np.sin(t)])
        best = np.inf
        for a, b in zip(poly2d, np.roll(poly2d, -1, axis=0)):
            e = b - a
            M = np.array([d, -e]).T
            if abs(np.linalg.det(M)) < 1e-300:
                continue
            s, u = np.linalg.solve(M, a - x)
            if s > 0 and -1e-12 <= u <= 1 + 1e-12:
                best = min(best, s)
        return best

    pts = np.sort(np.mod(ang, 2 * np.pi))
    edges = np.concatenate([[0.0], pts, [2 * np.pi]])
    total = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        if hi - lo > 0:
            total += integrate.quad(lambda t: np.sqrt(R(t) ** 2 + z * z) - abs(z), lo, hi,
                                    epsabs=1e-13, epsrel=1e-12, limit=200)[0]
    return total


SQUARE = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], float)
TRI = np.array([[0, 0, 0], [2, 0, 0], [0.5, 1.5, 0]], float)


@pytest.mark.parametrize("poly", [SQUARE, TRI])
@pytest.mark.parametrize("x", [(0.3, 0.4, 0.0), (0.3, 0.4, 0.2), (0.5, 0.2, -1.5), (0.1, 0.05, 1e-3)])
def test_polygon_potential_against_polar_oracle(poly, x):
    x = np.array(x)
    got = polygon_potential(poly[None], x[None])[0]
    assert got == pytest.approx(_polar_potential(poly[:, :2], x[:2], x[2]), rel=1e-9)


def test_polygon_potential_outside_point_cubature():
    x = np.array([2.5, -0.7, 0.3])
    ref = integrate.dblquad(lambda y, xx: 1 / np.linalg.norm(x - [xx, y, 0]), 0, 1, 0, 1,
                            epsabs=1e-13, epsrel=1e-12)[0]
    assert polygon_potential(SQUARE[None], x[None])[0] == pytest.approx(ref, rel=1e-10)


def test_vertex_and_edge_observers_are_finite():
    for x in [SQUARE[0], SQUARE[:2].mean(axis=0)]:
        v = polygon_potential(SQUARE[None], x[None])[0]
        assert np.isfinite(v) and v > 0
    # the corner of the unit square sees int = 2 ln(1+sqrt 2)
    assert polygon_potential(SQUARE[None], SQUARE[:1])[0] == pytest.approx(
        2 * np.log(1 + np.sqrt(2)), rel=1e-12)


def test_unit_square_self_term():
    pa = PanelArrays.from_mesh(build_mesh(SQUARE, [((0, 1, 2, 3), 0)], meshes.two_triangles().conductors))
    assert self_terms(pa)[0] == pytest.approx(UNIT_SQUARE_SELF, rel=1e-9)


def test_triangle_self_term_by_self_similarity():
    """Midpoint subdivision gives four triangles similar to T at scale 1/2, so
    I(T) = 4 I(T)/8 + sum_{a != b} I(T_a, T_b), i.e. I(T) = 2 sum_{a != b} I_ab.
    The cross terms have integrable-only singularities and are done by brute
    force on a refined sub-mesh with the closed-form inner integral."""
    v = TRI
    m = [(v[0] + v[1]) / 2, (v[1] + v[2]) / 2, (v[2] + v[0]) / 2]
    subs = [np.array(t) for t in ([v[0], m[0], m[2]], [m[0], v[1], m[1]],
                                  [m[2], m[1], v[2]], [m[0], m[1], m[2]])]

    def refine(t, levels):
        out = [t]
        for _ in range(levels):
            nxt = []
            for a, b, c in out:
                ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
                nxt += [np.array(x) for x in ([a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca])]
            out = nxt
        return out

    g, w = np.polynomial.legendre.leggauss(6)
    # Duffy-free product rule on the triangle via collapsed square
    s, t = np.meshgrid((g + 1) / 2, (g + 1) / 2, indexing="ij")
    W = np.outer(w, w).ravel() / 4 * (1 - s.ravel())
    bary = np.c_[s.ravel(), (1 - s.ravel()) * t.ravel()]

    def cross(ta, tb):
        total = 0.0
        for small in refine(ta, 3):
            area = 0.5 * np.linalg.norm(np.cross(small[1] - small[0], small[2] - small[0]))
            pts = small[0] + bary[:, :1] * (small[1] - small[0]) + bary[:, 1:] * (small[2] - small[0])
            V = polygon_potential(np.repeat(tb[None], len(pts), 0), pts)
            total += 2 * area * np.dot(W, V)
        return total

    I = 2 * sum(cross(subs[a], subs[b]) for a in range(4) for b in range(4) if a != b)
    pa = PanelArrays.from_mesh(build_mesh(TRI, [((0, 1, 2), 0)], meshes.two_triangles().conductors))
    area = 1.5
    assert self_terms(pa)[0] * area**2 == pytest.approx(I, rel=2e-4)


def test_far_pair_approaches_inverse_distance():
    sq = SQUARE * 1e-6
    verts = np.vstack([sq, sq + [1e-3, 2e-4, 0]])
    m = build_mesh(verts, [((0, 1, 2, 3), 0), ((4, 5, 6, 7), 0)], meshes.two_triangles().conductors)
    d = np.linalg.norm(m.centroids[0] - m.centroids[1])
    # multipole correction is O((a/d)^2) ~ 1e-6
    assert pair_entry(m, 0, 1) == pytest.approx(1 / d, rel=1e-5)


def test_potential_integral_two_call_forms():
    m = meshes.strip()
    x = np.array([0.3, 0.2, 0.1])
    a = potential_integral(m, m.panels[0], x)
    b = potential_integral(m.vertices[list(m.panels[0].vertex_indices)], point=x)
    assert a == pytest.approx(b, rel=1e-15)


@given(st.floats(-np.pi, np.pi), st.floats(-np.pi, np.pi), st.floats(-np.pi, np.pi),
       st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_isometry_invariance(a, b, c, tx, ty, tz):
    m = meshes.sheet(3, 2, 1.0, 0.8)
    R = Rotation.from_euler("xyz", [a, b, c]).as_matrix()
    moved = build_mesh(m.vertices @ R.T + [tx, ty, tz], [(p.vertex_indices, 0) for p in m.panels],
                       m.conductors)
    np.testing.assert_allclose(dense_P(moved), dense_P(m), rtol=1e-10)


@given(st.floats(0.01, 100))
def test_scaling_law(s):
    m = meshes.sheet(2, 2, 1.0, 1.0)
    big = build_mesh(m.vertices * s, [(p.vertex_indices, 0) for p in m.panels], m.conductors)
    np.testing.assert_allclose(dense_P(big), dense_P(m) / s, rtol=1e-10)


@pytest.mark.parametrize("name", ["plate", "coils-coarse", "wire-coarse"])
def test_dense_P_symmetric_positive_definite(name):
    P = dense_P(meshes.BUILTIN[name]())
    assert np.allclose(P, P.T, rtol=0, atol=0)
    assert np.linalg.eigvalsh(P).min() > 0


def test_near_block_subset():
    m = meshes.sheet(3, 3)
    pairs = np.array([[0, 0], [0, 1], [4, 2]])
    blk = assemble_near_field(m, pairs)
    assert blk.n_pairs == 3 and blk.nnz == 5
    full = dense_P(m)
    assert blk.P[2, 4] == blk.P[4, 2] == pytest.approx(full[2, 4], rel=1e-14)
