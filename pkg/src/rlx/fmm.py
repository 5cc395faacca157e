"""Static Laplace FMM over point charges (panel centroids).

Solid harmonics (``P_n^m`` with Condon-Shortley phase)::

    R_n^m(r) = r^n P_n^m(cos t) e^{im phi} / (n+m)!
    I_n^m(r) = (n-m)! P_n^m(cos t) e^{im phi} / r^(n+1)

with ``X_n^-m = (-1)^m conj(X_n^m)``. They satisfy
``1/|x-y| = sum conj(R_n^m(y)) I_n^m(x)`` for ``|y| < |x|`` and the
addition theorems used by the translation operators below.

Multipoles ``M = sum q conj(R(y - c))`` evaluate as ``sum M I(x - c)``;
locals evaluate as ``Re sum L conj(R(x - z))``.

The tree is an adaptive octree with the usual lists: U (near leaves,
direct), V (same-level interaction list, M2L), W (M2P) and X (P2L).
All translation operators are precomputed at build time.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from itertools import product

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

MAX_LEVEL = 21


def nterms(p: int) -> int:
    return (p + 1) ** 2


def idx(n, m):
    return n * n + n + m


def _fill_negative(out, pos, p):
    for n in range(p + 1):
        for m in range(n + 1):
            out[:, idx(n, m)] = pos[n][m]
            if m:
                out[:, idx(n, -m)] = (-1) ** m * np.conj(pos[n][m])
    return out


def regular(x: np.ndarray, p: int) -> np.ndarray:
    """``R_n^m`` at points ``x`` (N, 3) -> (N, (p+1)^2) complex."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    xy = x[:, 0] + 1j * x[:, 1]
    z = x[:, 2]
    r2 = np.einsum("ij,ij->i", x, x)
    pos = [[None] * (n + 1) for n in range(p + 1)]
    pos[0][0] = np.ones(len(x), dtype=complex)
    for m in range(p + 1):
        if m:
            pos[m][m] = pos[m - 1][m - 1] * (-xy) / (2 * m)
        if m + 1 <= p:
            pos[m + 1][m] = z * pos[m][m]
        for n in range(m + 2, p + 1):
            pos[n][m] = ((2 * n - 1) * z * pos[n - 1][m] - r2 * pos[n - 2][m]) / ((n - m) * (n + m))
    return _fill_negative(np.empty((len(x), nterms(p)), dtype=complex), pos, p)


def irregular(x: np.ndarray, p: int) -> np.ndarray:
    """``I_n^m`` at points ``x`` (N, 3) -> (N, (p+1)^2) complex."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    xy = x[:, 0] + 1j * x[:, 1]
    z = x[:, 2]
    r2 = np.einsum("ij,ij->i", x, x)
    inv_r2 = 1.0 / r2
    pos = [[None] * (n + 1) for n in range(p + 1)]
    pos[0][0] = np.sqrt(inv_r2).astype(complex)
    for m in range(p + 1):
        if m:
            pos[m][m] = pos[m - 1][m - 1] * (-(2 * m - 1)) * xy * inv_r2
        if m + 1 <= p:
            pos[m + 1][m] = (2 * m + 1) * z * pos[m][m] * inv_r2
        for n in range(m + 2, p + 1):
            pos[n][m] = ((2 * n - 1) * z * pos[n - 1][m]
                         - (n + m - 1) * (n - m - 1) * pos[n - 2][m]) * inv_r2
    return _fill_negative(np.empty((len(x), nterms(p)), dtype=complex), pos, p)


def _nm_table(p):
    n = np.concatenate([[k] * (2 * k + 1) for k in range(p + 1)])
    m = np.concatenate([np.arange(-k, k + 1) for k in range(p + 1)])
    return n, m


def m2l_matrices(offsets: np.ndarray, p: int) -> np.ndarray:
    """M2L operators for source-to-target displacements ``D = z - c``."""
    n, m = _nm_table(p)
    # T[(k,l), (n,m)] = (-1)^k I_{n+k}^{m+l}(D)
    col = idx(n[None, :] + n[:, None], m[None, :] + m[:, None])
    sign = (-1.0) ** n[:, None]
    Iv = irregular(offsets, 2 * p)
    return Iv[:, col] * sign[None]


def _shift_matrices(d: np.ndarray, p: int, upward: bool) -> np.ndarray:
    n, m = _nm_table(p)
    Rc = np.conj(regular(d, p))
    if upward:
        # M2M: T[(n,m), (n',m')] = conj R_{n-n'}^{m-m'}(d)
        dn = n[:, None] - n[None, :]
        dm = m[:, None] - m[None, :]
    else:
        # L2L: T[(j,s), (k,l)] = conj R_{k-j}^{l-s}(e)
        dn = n[None, :] - n[:, None]
        dm = m[None, :] - m[:, None]
    ok = (dn >= 0) & (np.abs(dm) <= dn)
    col = np.where(ok, idx(np.maximum(dn, 0), np.where(ok, dm, 0)), 0)
    return np.where(ok[None], Rc[:, col], 0.0)



# Real charges give coefficient vectors with X_n^-m = (-1)^m conj(X_n^m).
# Such a vector is stored as K reals: slot (n, m>=0) holds Re X_n^m and
# slot (n, -m) holds Im X_n^m.


def _real_slots(p):
    n, m = _nm_table(p)
    return idx(n, np.abs(m)), m


def to_real(X: np.ndarray, p: int, axis: int = -1) -> np.ndarray:
    """Pack symmetric complex coefficients along ``axis`` into reals."""
    src, m = _real_slots(p)
    Xs = np.take(X, src, axis=axis)
    shape = [1] * Xs.ndim
    shape[axis] = -1
    return np.where((m < 0).reshape(shape), Xs.imag, Xs.real)


def from_real(r: np.ndarray, p: int) -> np.ndarray:
    """Inverse of :func:`to_real` along the last axis."""
    n, m = _nm_table(p)
    src, _ = _real_slots(p)
    re = r[..., src]
    im = np.where(m == 0, 0.0, r[..., idx(n, -np.abs(m))])
    sign = np.where(m < 0, (-1.0) ** np.abs(m), 1.0)
    conj = np.where(m < 0, -1.0, 1.0)
    return sign * (re + 1j * conj * im)


def eval_weights(S: np.ndarray, p: int) -> np.ndarray:
    """Real ``G`` with ``Re sum_k S_k X_k = G . to_real(X)`` for symmetric X.

    ``S`` must itself obey the same symmetry (true for R, conj R and I).
    """
    src, m = _real_slots(p)
    Ss = S[..., src]
    return np.where(m == 0, Ss.real, np.where(m > 0, 2 * Ss.real, -2 * Ss.imag))


def real_operator(T: np.ndarray, p: int) -> np.ndarray:
    """Real form of symmetry-preserving complex operators ``T`` (..., K, K)."""
    K = nterms(p)
    C = sp.csr_matrix(from_real(np.eye(K), p).T)  # columns = real basis vectors
    lead = T.shape[:-2]
    flat = T.reshape(-1, K)
    TC = (C.T @ flat.T).T.reshape(lead + (K, K))
    return to_real(TC, p, axis=-2)


@dataclass
class FmmTree:
    points: np.ndarray
    order: int
    max_leaf_size: int
    separation: int
    perm: np.ndarray  # sorted position -> original index
    level: np.ndarray
    coord: np.ndarray  # integer box coordinates at its level
    center: np.ndarray
    size: np.ndarray  # box edge length
    parent: np.ndarray
    children: list
    start: np.ndarray
    stop: np.ndarray
    leaf: np.ndarray
    U: list = field(default_factory=list)  # (leaf, leaf), both directions
    V: dict = field(default_factory=dict)  # level -> (tgt, src, offset id)
    W: list = field(default_factory=list)  # (target leaf, source box)
    X: list = field(default_factory=list)  # (target box, source leaf)
    ops: dict = field(default_factory=dict)

    @property
    def n_boxes(self) -> int:
        return len(self.level)

    @property
    def n_points(self) -> int:
        return len(self.points)

    @property
    def depth(self) -> int:
        return int(self.level.max())

    def leaves(self) -> np.ndarray:
        return np.flatnonzero(self.leaf)

    def box_points(self, b: int) -> np.ndarray:
        """Original indices of the points inside box ``b``."""
        return self.perm[self.start[b] : self.stop[b]]

    def leaf_of_point(self) -> np.ndarray:
        out = np.empty(self.n_points, dtype=int)
        for b in self.leaves():
            out[self.box_points(b)] = b
        return out

    def near_pairs(self) -> np.ndarray:
        """Unordered point pairs ``(i, j)``, ``i <= j``, in near leaves."""
        chunks = []
        for a, b in self.U:
            if a > b:
                continue
            pa, pb = self.box_points(a), self.box_points(b)
            if a == b:
                ii, jj = np.triu_indices(len(pa))
                chunks.append(np.stack([pa[ii], pa[jj]], axis=1))
            else:
                chunks.append(np.stack(np.meshgrid(pa, pb, indexing="ij"), axis=-1).reshape(-1, 2))
        if not chunks:
            return np.zeros((0, 2), dtype=int)
        return np.sort(np.concatenate(chunks), axis=1)


def boxes_near(tree: FmmTree, a: int, b: int) -> bool:
    """Gap between the boxes is below ``separation`` widths of the smaller one."""
    la, lb = int(tree.level[a]), int(tree.level[b])
    top = max(la, lb)
    lo_a = tree.coord[a] << (top - la)
    lo_b = tree.coord[b] << (top - lb)
    hi_a = lo_a + (1 << (top - la))
    hi_b = lo_b + (1 << (top - lb))
    gap = np.maximum(0, np.maximum(lo_b - hi_a, lo_a - hi_b))
    return bool(gap.max() < tree.separation)


def build_tree(points, max_leaf_size: int = 64, order: int = 8, separation: int = 2) -> FmmTree:
    """Adaptive octree plus interaction lists and precomputed translations.

    ``separation`` is the number of box widths two same-level boxes must
    be apart before they interact through expansions (1 is the classic
    nearest-neighbour rule).
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) < 1:
        raise ValueError("need at least one point")
    if order < 2:
        raise ValueError("expansion order must be >= 2")
    if separation < 1:
        raise ValueError("separation must be >= 1")
    if max_leaf_size < 1:
        raise ValueError("max_leaf_size must be >= 1")
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    root_size = float(max(hi - lo)) * (1 + 1e-9) or 1.0
    root_center = 0.5 * (lo + hi)

    perm = np.arange(len(pts))
    level, coord, center, size = [0], [np.zeros(3, int)], [root_center], [root_size]
    parent, children, start, stop = [-1], [[]], [0], [len(pts)]
    queue = deque([0])
    while queue:
        b = queue.popleft()
        s, e = start[b], stop[b]
        if e - s <= max_leaf_size or level[b] >= MAX_LEVEL:
            continue
        sub = perm[s:e]
        bits = (pts[sub] > center[b]).astype(int)
        octant = bits[:, 0] + 2 * bits[:, 1] + 4 * bits[:, 2]
        perm[s:e] = sub[np.argsort(octant, kind="stable")]
        counts = np.bincount(octant, minlength=8)
        offs = s + np.concatenate([[0], np.cumsum(counts)])
        for o in range(8):
            if counts[o] == 0:
                continue
            ob = np.array([o & 1, (o >> 1) & 1, (o >> 2) & 1])
            c = len(level)
            level.append(level[b] + 1)
            coord.append(2 * coord[b] + ob)
            center.append(center[b] + (ob - 0.5) * size[b] / 2)
            size.append(size[b] / 2)
            parent.append(b)
            children.append([])
            start.append(int(offs[o]))
            stop.append(int(offs[o + 1]))
            children[b].append(c)
            queue.append(c)

    tree = FmmTree(
        points=pts, order=order, max_leaf_size=max_leaf_size, separation=separation,
        perm=perm, level=np.array(level), coord=np.array(coord), center=np.array(center),
        size=np.array(size), parent=np.array(parent), children=children,
        start=np.array(start), stop=np.array(stop),
        leaf=np.array([len(c) == 0 for c in children]),
    )
    _build_lists(tree)
    _precompute(tree)
    logger.debug("fmm tree: %d points, %d boxes, depth %d, p=%d",
                 len(pts), tree.n_boxes, tree.depth, order)
    return tree


def _build_lists(tree: FmmTree):
    coords = [tuple(int(c) for c in row) for row in tree.coord]
    levels = [int(v) for v in tree.level]
    lookup = {(levels[b],) + coords[b]: b for b in range(tree.n_boxes)}
    ws = tree.separation
    steps = list(product(range(-ws, ws + 1), repeat=3))

    def colleagues(b):
        x, y, z = coords[b]
        lv = levels[b]
        out = []
        for dx, dy, dz in steps:
            c = lookup.get((lv, x + dx, y + dy, z + dz))
            if c is not None:
                out.append(c)
        return out

    def near(a, b):
        la, lb = levels[a], levels[b]
        top = max(la, lb)
        sa, sb = top - la, top - lb
        for ca, cb in zip(coords[a], coords[b]):
            lo_a, lo_b = ca << sa, cb << sb
            if lo_b - (lo_a + (1 << sa)) >= ws or lo_a - (lo_b + (1 << sb)) >= ws:
                return False
        return True

    U, W = set(), []
    for b in tree.leaves().tolist():
        stack = colleagues(b)
        while stack:
            c = stack.pop()
            if not near(b, c):
                W.append((b, c))
            elif tree.leaf[c]:
                U.add((b, c))
                U.add((c, b))
            else:
                stack.extend(tree.children[c])
    tree.U = sorted(U)
    tree.W = sorted(W)
    tree.X = sorted((c, b) for b, c in W)

    offsets, V = {}, {}
    for b in range(tree.n_boxes):
        if levels[b] < 2:
            continue
        xb, yb, zb = coords[b]
        for pc in colleagues(int(tree.parent[b])):
            for c in tree.children[pc]:
                d = (coords[c][0] - xb, coords[c][1] - yb, coords[c][2] - zb)
                if max(abs(d[0]), abs(d[1]), abs(d[2])) <= ws:
                    continue
                oid = offsets.setdefault(d, len(offsets))
                V.setdefault(levels[b], []).append((b, c, oid))
    tree.ops["v_offsets"] = np.array(sorted(offsets, key=offsets.get), dtype=float).reshape(-1, 3)
    tree.V = {lv: np.array(v, dtype=int) for lv, v in V.items()}


def _pair_rows(pairs, tree, K, nb, point_side):
    """Point/box harmonic blocks for W (M2P) or X (P2L) pairs."""
    rows, cols, vals = [], [], []
    p = tree.order
    for tgt, src in pairs:
        if point_side == "target":
            ids, box = tree.box_points(tgt), src
        else:
            ids, box = tree.box_points(src), tgt
        Iv = irregular(tree.points[ids] - tree.center[box], p)
        slot = np.arange(K) * nb + box
        if point_side == "target":
            vals.append(eval_weights(Iv, p).ravel())
            rows.append(np.repeat(ids, K))
            cols.append(np.tile(slot, len(ids)))
        else:
            vals.append(to_real(Iv, p).ravel())
            rows.append(np.tile(slot, len(ids)))
            cols.append(np.repeat(ids, K))
    n = tree.n_points
    shape = (n, nb * K) if point_side == "target" else (nb * K, n)
    if not rows:
        return sp.csr_matrix(shape)
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=shape)


def _precompute(tree: FmmTree):
    # coefficient arrays are laid out (K, n_boxes, ncol); slot = k*nb + box
    p = tree.order
    K = nterms(p)
    n = tree.n_points
    nb = tree.n_boxes
    leaf_of = tree.leaf_of_point()

    Rc = np.conj(regular(tree.points - tree.center[leaf_of], p))
    rows = np.repeat(np.arange(n), K)
    cols = (np.arange(K)[None, :] * nb + leaf_of[:, None]).ravel()
    tree.ops["P2M"] = sp.csr_matrix((to_real(Rc, p).ravel(), (rows, cols)), shape=(n, nb * K)).T.tocsr()
    tree.ops["L2P"] = sp.csr_matrix((eval_weights(Rc, p).ravel(), (rows, cols)), shape=(n, nb * K))
    tree.ops["M2P"] = _pair_rows(tree.W, tree, K, nb, "target")
    tree.ops["P2L"] = _pair_rows(tree.X, tree, K, nb, "source")

    shifts = {}
    corners = np.array([[(o & 1) - 0.5, ((o >> 1) & 1) - 0.5, ((o >> 2) & 1) - 0.5]
                        for o in range(8)])
    for lv in range(1, tree.depth + 1):
        h = tree.size[np.flatnonzero(tree.level == lv)[0]]
        d = corners * h  # child centre minus parent centre
        shifts[lv] = (real_operator(_shift_matrices(d, p, upward=True), p),
                      real_operator(_shift_matrices(d, p, upward=False), p))
    tree.ops["shift"] = shifts
    tree.ops["octant"] = (tree.coord[:, 0] & 1) + 2 * (tree.coord[:, 1] & 1) + 4 * (tree.coord[:, 2] & 1)

    m2l = {}
    unit = tree.ops["v_offsets"]
    for lv, pairs in tree.V.items():
        h = tree.size[np.flatnonzero(tree.level == lv)[0]]
        pairs = pairs[np.argsort(pairs[:, 2], kind="stable")]
        used, first = np.unique(pairs[:, 2], return_index=True)
        # D = z_target - c_source = -offset * h
        T = real_operator(m2l_matrices(-unit[used] * h, p), p)
        bounds = np.append(first, len(pairs))
        m2l[lv] = [(T[g], pairs[bounds[g]:bounds[g + 1], 0], pairs[bounds[g]:bounds[g + 1], 1])
                   for g in range(len(used))]
    tree.ops["m2l"] = m2l
    tree.ops["by_level"] = [np.flatnonzero(tree.level == lv) for lv in range(tree.depth + 1)]


def _apply(T, X, src):
    K = X.shape[0]
    blk = X[:, src].reshape(K, -1)
    return (T @ blk).reshape(K, len(src), -1)


def far_field(tree: FmmTree, q: np.ndarray) -> np.ndarray:
    """Far-field potentials for real charges ``q`` (N,) or (N, ncol)."""
    q = np.asarray(q, dtype=float)
    squeeze = q.ndim == 1
    Q = q.reshape(tree.n_points, -1)
    ncol = Q.shape[1]
    K = nterms(tree.order)
    nb = tree.n_boxes
    ops = tree.ops
    by_level, octant = ops["by_level"], ops["octant"]

    M = (ops["P2M"] @ Q).reshape(K, nb, ncol)
    for lv in range(tree.depth, 0, -1):
        up, _ = ops["shift"][lv]
        boxes = by_level[lv]
        oc = octant[boxes]
        for o in range(8):
            ch = boxes[oc == o]
            if len(ch):
                M[:, tree.parent[ch]] += _apply(up[o], M, ch)

    L = (ops["P2L"] @ Q).reshape(K, nb, ncol)
    for groups in ops["m2l"].values():
        for T, tgt, src in groups:
            L[:, tgt] += _apply(T, M, src)
    for lv in range(1, tree.depth + 1):
        _, down = ops["shift"][lv]
        boxes = by_level[lv]
        oc = octant[boxes]
        for o in range(8):
            ch = boxes[oc == o]
            if len(ch):
                L[:, ch] += _apply(down[o], L, tree.parent[ch])

    y = ops["L2P"] @ L.reshape(K * nb, ncol) + ops["M2P"] @ M.reshape(K * nb, ncol)
    return y[:, 0] if squeeze else y


def point_near_block(tree: FmmTree) -> sp.csr_matrix:
    """Near interactions ``1/|x_i - x_j|`` with zero self term, for point tests."""
    pairs = tree.near_pairs()
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    v = 1.0 / np.linalg.norm(tree.points[pairs[:, 0]] - tree.points[pairs[:, 1]], axis=1)
    n = tree.n_points
    return sp.csr_matrix(
        (np.concatenate([v, v]), (np.concatenate([pairs[:, 0], pairs[:, 1]]),
                                  np.concatenate([pairs[:, 1], pairs[:, 0]]))),
        shape=(n, n),
    )


class FmmError(ValueError):
    pass


def fmm_mvm(tree: FmmTree, near, x) -> np.ndarray:
    """``y ~ P x``: exact near block plus the multipole far field.

    ``near`` is a sparse matrix or anything with a ``P`` attribute holding
    one. ``x`` may be real or complex, 1-D or with columns.
    """
    near = getattr(near, "P", near)
    x = np.asarray(x)
    if x.shape[0] != tree.n_points:
        raise FmmError(f"vector length {x.shape[0]} != {tree.n_points} points")
    if near.shape != (tree.n_points, tree.n_points):
        raise FmmError("near block was not built for this tree")
    if np.iscomplexobj(x):
        cols = x.reshape(tree.n_points, -1)
        k = cols.shape[1]
        far = far_field(tree, np.concatenate([cols.real, cols.imag], axis=1))
        y = (far[:, :k] + 1j * far[:, k:]).reshape(x.shape)
    else:
        y = far_field(tree, x)
    return y + near @ x


def direct_sum(points: np.ndarray, q: np.ndarray, block: int = 1024) -> np.ndarray:
    """O(N^2) potentials ``sum_{j != i} q_j / |x_i - x_j|``."""
    pts = np.asarray(points, dtype=float)
    q = np.asarray(q)
    out = np.zeros(q.shape, dtype=np.result_type(q, float))
    for s in range(0, len(pts), block):
        d = np.linalg.norm(pts[s : s + block, None, :] - pts[None, :, :], axis=-1)
        with np.errstate(divide="ignore"):
            inv = np.where(d > 0, 1.0 / d, 0.0)
        out[s : s + block] = inv @ q
    return out


def coverage_counts(tree: FmmTree) -> np.ndarray:
    """How many times each ordered point pair is accounted for (near or far).

    Walks the lists symbolically; a correct tree gives 1 everywhere
    (the diagonal counts the self pair through the near list).
    """
    n = tree.n_points
    cnt = np.zeros((n, n), dtype=int)
    for a, b in tree.U:
        cnt[np.ix_(tree.box_points(a), tree.box_points(b))] += 1
    for tgt, src in tree.W:
        cnt[np.ix_(tree.box_points(tgt), tree.box_points(src))] += 1
    for tgt, src in tree.X:
        cnt[np.ix_(tree.box_points(tgt), tree.box_points(src))] += 1
    for pairs in tree.V.values():
        for tgt, src, _ in pairs:
            cnt[np.ix_(tree.box_points(tgt), tree.box_points(src))] += 1
    return cnt
