"""Fundamental-cycle loop basis over the PEEC branch graph."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .geometry import PORT, BranchGraph


@dataclass(frozen=True)
class LoopBasis:
    M: sp.csr_matrix  # N_l x N_b, entries in {-1, 0, +1}
    n_components: int
    port_loop_index: dict[str, int]
    loops: tuple[tuple[int, ...], ...]  # branch ids per loop, co-tree branch first

    @property
    def n_loops(self) -> int:
        return self.M.shape[0]

    def edge_part(self, n_edges: int) -> sp.csr_matrix:
        """Columns of M belonging to interior edges, as float."""
        return self.M[:, :n_edges].astype(float).tocsr()


def _spanning_forest(graph: BranchGraph):
    adj: list[list[tuple[int, int]]] = [[] for _ in range(graph.n_nodes)]
    for b in range(graph.n_branches):
        if graph.kind[b] == PORT:
            continue  # port branches always close a loop
        u, v = int(graph.tail[b]), int(graph.head[b])
        adj[u].append((b, v))
        adj[v].append((b, u))
    parent = np.full(graph.n_nodes, -1)
    parent_branch = np.full(graph.n_nodes, -1)
    depth = np.full(graph.n_nodes, -1)
    in_tree = np.zeros(graph.n_branches, dtype=bool)
    n_comp = 0
    for root in range(graph.n_nodes):
        if depth[root] >= 0:
            continue
        n_comp += 1
        depth[root] = 0
        queue = deque([root])
        while queue:
            x = queue.popleft()
            for b, y in sorted(adj[x]):
                if depth[y] < 0:
                    depth[y] = depth[x] + 1
                    parent[y] = x
                    parent_branch[y] = b
                    in_tree[b] = True
                    queue.append(y)
    return parent, parent_branch, depth, in_tree, n_comp


def build_loop_basis(graph: BranchGraph) -> LoopBasis:
    parent, pbranch, depth, in_tree, n_comp = _spanning_forest(graph)
    tail, head = graph.tail, graph.head
    rows, cols, vals, loops = [], [], [], []
    for b in np.flatnonzero(~in_tree):
        u, v = int(tail[b]), int(head[b])
        entries = [(int(b), 1)]
        # walk v and u up to their common ancestor; the loop runs b, v -> lca -> u
        down = []
        x, y = v, u
        while x != y:
            if depth[x] >= depth[y]:
                t = int(pbranch[x])
                entries.append((t, 1 if tail[t] == x else -1))
                x = parent[x]
            else:
                t = int(pbranch[y])
                down.append((t, 1 if head[t] == y else -1))
                y = parent[y]
        entries.extend(reversed(down))
        l = len(loops)
        loops.append(tuple(e for e, _ in entries))
        for e, s in entries:
            rows.append(l)
            cols.append(e)
            vals.append(s)
    M = sp.csr_matrix(
        (np.array(vals, dtype=np.int8), (rows, cols)), shape=(len(loops), graph.n_branches)
    )
    M.sum_duplicates()
    port_loop = {}
    for name, b in zip(graph.port_names, graph.port_branch):
        port_loop[name] = next(l for l, lp in enumerate(loops) if lp[0] == b)
    return LoopBasis(M, n_comp, port_loop, tuple(loops))


def loop_excitation(basis: LoopBasis, graph: BranchGraph, port: str, volts: float = 1.0) -> np.ndarray:
    """Loop voltages for a source of ``volts`` in the named port branch."""
    if port not in basis.port_loop_index:
        raise KeyError(f"unknown port {port!r}")
    v_branch = np.zeros(graph.n_branches)
    v_branch[graph.port_branch[graph.port_names.index(port)]] = volts
    return basis.M @ v_branch


def recover_edge_currents(basis: LoopBasis, loop_currents) -> np.ndarray:
    x = np.asarray(loop_currents)
    if x.shape[0] != basis.n_loops:
        raise ValueError(f"expected {basis.n_loops} loop currents, got {x.shape[0]}")
    return basis.M.T @ x


def dump_loops(basis: LoopBasis) -> str:
    return "\n".join(
        f"loop {l}: " + " ".join(str(b) for b in lp) for l, lp in enumerate(basis.loops)
    )
