"""Loop-space impedance operator ``Z_l = Z_s + jw mu0/4pi M (sum_t A_t P A_t^T) M^T``.

Everything frequency independent (graph, loops, mapping, tree, near block)
is built once; :meth:`SystemOperator.set_frequency` only refreshes the
surface-impedance scalars and the coefficient of the inductive part.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .basis_map import CmMapping, build_mapping
from .fmm import FmmTree, build_tree, fmm_mvm
from .geometry import BranchGraph, SurfaceMesh, build_branch_graph, build_connectivity
from .loop_analysis import LoopBasis, build_loop_basis, loop_excitation
from .panel_kernel import NearFieldBlock, PanelArrays, assemble_near_field, pair_entries
from .surface_impedance import MU0, esi

logger = logging.getLogger(__name__)


class OperatorError(RuntimeError):
    pass


@dataclass(frozen=True)
class FmmConfig:
    order: int = 8
    leaf_size: int = 64
    separation: int = 2
    direct: bool = False  # dense P instead of the multipole far field


class SystemOperator:
    """Frequency-parametrised MVM over loop currents."""

    def __init__(self, mesh: SurfaceMesh, fmm: FmmConfig = FmmConfig(), esi_model: str = "coth"):
        t0 = time.perf_counter()
        self.mesh = mesh
        self.fmm_config = fmm
        self.esi_model = esi_model
        self.edges = build_connectivity(mesh)
        self.graph: BranchGraph = build_branch_graph(mesh, self.edges)
        self.loops: LoopBasis = build_loop_basis(self.graph)
        self.mapping: CmMapping = build_mapping(mesh, self.edges)
        self.panels = PanelArrays.from_mesh(mesh)
        n_e = len(self.edges)
        Me = self.loops.edge_part(n_e)
        # B_t = M_e A_t, so that A_t^T M_e^T x = B_t^T x
        self.B = tuple((Me @ a).tocsr() for a in self.mapping.A)
        self.Bt = tuple(b.T.tocsr() for b in self.B)

        self.tree: FmmTree = build_tree(mesh.centroids, fmm.leaf_size, fmm.order, fmm.separation)
        self.near: NearFieldBlock = assemble_near_field(mesh, self.tree.near_pairs(), self.panels)
        self._dense_P = self.dense_P() if fmm.direct else None

        # resistive part per conductor: sum_t B_t diag(1/A on conductor c) B_t^T
        inv_area = 1.0 / mesh.areas
        cid = mesh.conductor_ids
        self.R_parts = []
        for c in range(len(mesh.conductors)):
            d = sp.diags(np.where(cid == c, inv_area, 0.0))
            self.R_parts.append(sum((b @ d @ bt for b, bt in zip(self.B, self.Bt))).tocsr())
        self.excitation = np.column_stack(
            [loop_excitation(self.loops, self.graph, name) for name in self.graph.port_names]
        ) if self.graph.port_names else np.zeros((self.n_loops, 0))
        port_cols = self.graph.port_branch
        self.port_readout = self.loops.M[:, port_cols].astype(float).T.tocsr()

        self.frequency: float | None = None
        self.omega = 0.0
        self.coef = 0.0
        self.Zs_matrix: sp.csr_matrix | None = None
        self.n_mvm = 0
        self.n_fmm = 0
        self.build_seconds = time.perf_counter() - t0
        logger.info(
            "operator: N_p=%d N_e=%d N_l=%d near nnz=%d boxes=%d (%.2fs)",
            self.n_panels, self.n_edges, self.n_loops, self.near.nnz, self.tree.n_boxes,
            self.build_seconds,
        )

    @property
    def n_panels(self) -> int:
        return self.mesh.n_panels

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_loops(self) -> int:
        return self.loops.n_loops

    @property
    def n_ports(self) -> int:
        return len(self.graph.port_names)

    # -- frequency state ---------------------------------------------------

    def surface_impedances(self, f: float) -> np.ndarray:
        return np.array([esi(m, f, self.esi_model) for m in self.mesh.conductors])

    def set_frequency(self, f: float):
        if not f >= 0:
            raise OperatorError(f"invalid frequency {f}")
        self.frequency = float(f)
        self.omega = 2 * np.pi * f
        self.coef = 1j * self.omega * MU0 / (4 * np.pi)
        zs = self.surface_impedances(f)
        Z = sp.csr_matrix((self.n_loops, self.n_loops), dtype=complex)
        for z, R in zip(zs, self.R_parts):
            Z = Z + z * R
        self.Zs_matrix = Z.tocsr()

    def _require_frequency(self):
        if self.frequency is None:
            raise OperatorError("frequency not set")

    # -- products ------------------------------------------------------------

    def apply_P(self, q: np.ndarray) -> np.ndarray:
        """``P q`` for panel vectors (columns allowed)."""
        if self._dense_P is not None:
            return self._dense_P @ q
        return fmm_mvm(self.tree, self.near, q)

    def inductive_mvm(self, x: np.ndarray) -> np.ndarray:
        """``M (sum_t A_t P A_t^T) M^T x`` with one batched far-field pass."""
        x = np.asarray(x)
        cols = x.reshape(self.n_loops, -1)
        k = cols.shape[1]
        q = np.concatenate([bt @ cols for bt in self.Bt], axis=1)
        y = self.apply_P(q)
        self.n_fmm += 3
        out = sum(b @ y[:, t * k : (t + 1) * k] for t, b in enumerate(self.B))
        return out.reshape(x.shape)

    def mvm(self, x: np.ndarray) -> np.ndarray:
        self._require_frequency()
        self.n_mvm += 1
        x = np.asarray(x, dtype=complex)
        y = self.Zs_matrix @ x
        if self.omega:
            y = y + self.coef * self.inductive_mvm(x)
        return y

    __call__ = mvm

    # -- oracles and helpers -------------------------------------------------

    def dense_P(self) -> np.ndarray:
        """The discrete P the fast path approximates: near entries plus ``1/|c_k - c_l|``."""
        c = self.mesh.centroids
        d = np.linalg.norm(c[:, None, :] - c[None, :, :], axis=-1)
        with np.errstate(divide="ignore"):
            P = np.where(d > 0, 1.0 / d, 0.0)
        near = self.near.P.tocoo()
        P[near.row, near.col] = near.data
        return P

    def dense_matrix(self, P: np.ndarray | None = None) -> np.ndarray:
        """Explicit ``Z_l`` from dense products (no MVM involved)."""
        self._require_frequency()
        P = self.dense_P() if P is None else P
        Z = self.Zs_matrix.toarray()
        if self.omega:
            ind = sum(b @ (b @ P.T).T for b in self.B)  # B P B^T
            Z = Z + self.coef * np.asarray(ind)
        return Z

    def materialize(self) -> np.ndarray:
        """``Z_l`` obtained by applying :meth:`mvm` to the identity."""
        return self.mvm(np.eye(self.n_loops, dtype=complex))

    def self_P(self) -> np.ndarray:
        return self.near.diagonal

    def edge_self_inductance(self) -> np.ndarray:
        """Diagonal of ``sum_t A_t P A_t^T``, computed per edge from panel integrals."""
        i = np.array([e.i for e in self.edges], dtype=int)
        j = np.array([e.j for e in self.edges], dtype=int)
        Pii = pair_entries(self.panels, i, i)
        Pjj = pair_entries(self.panels, j, j)
        Pij = pair_entries(self.panels, np.minimum(i, j), np.maximum(i, j))
        out = np.zeros(len(i))
        for a in self.mapping.A:
            a = a.tocsr()
            ai = np.asarray(a[np.arange(len(i)), i]).ravel()
            aj = np.asarray(a[np.arange(len(j)), j]).ravel()
            out += ai * ai * Pii + aj * aj * Pjj + 2 * ai * aj * Pij
        return out

    def port_currents(self, loop_currents: np.ndarray) -> np.ndarray:
        return self.port_readout @ loop_currents


def smallest_singular_value(op: SystemOperator) -> float:
    """Relative smallest singular value of the loop -> panel-current map.

    A (near) zero means some loop current produces no panel current at all,
    so the loop matrix would be singular. Dense; meant for small meshes.
    """
    B = sp.hstack(op.B).toarray()
    if B.size == 0:
        return float("nan")
    s = np.linalg.svd(B, compute_uv=False)
    return float(s[-1] / s[0])
