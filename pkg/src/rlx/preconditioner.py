"""Sparse loop-space preconditioners.

``diag-p``: ``Q = Z_s + jw mu0/4pi * M (sum_t A_t diag(P_kk) A_t^T) M^T``.
It keeps every same-panel coupling between edges, and the panel self
terms come for free from the near-field block.

``diag-l``: ``Q = Z_s + jw mu0/4pi * M diag(L_e) M^T`` where ``L_e`` are
the edge self inductances (diagonal of ``sum_t A_t P A_t^T``), computed
edge by edge from panel integrals.

Both patterns are fixed at build time. Per frequency only the values are
recombined and refactorised.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .system_operator import SystemOperator

logger = logging.getLogger(__name__)

KINDS = ("diag-p", "diag-l", "none")
_PIVOT_RTOL = 1e-13


class PreconditionerError(RuntimeError):
    pass


def _aligned(pattern: sp.csr_matrix, X: sp.spmatrix) -> np.ndarray:
    """Values of ``X`` at the stored positions of ``pattern`` (zeros elsewhere)."""
    coo = pattern.tocoo()
    return np.asarray(X.tocsr()[coo.row, coo.col]).ravel()


@dataclass
class PrecondFactor:
    kind: str
    n: int
    pattern: sp.csr_matrix | None = None  # union sparsity of Q, frequency invariant
    parts: list = field(default_factory=list)  # aligned values: one per conductor, then inductive
    setup_seconds: float = 0.0  # frequency-invariant build + first factorisation
    build_seconds: float = 0.0
    frequency: float | None = None
    Q: sp.csc_matrix | None = None
    lu: object = None
    min_pivot: float = np.nan
    n_factorizations: int = 0

    def apply(self, v: np.ndarray) -> np.ndarray:
        """``Q^{-1} v`` (identity for ``none``)."""
        if self.kind == "none":
            return np.array(v, dtype=complex, copy=True)
        if self.lu is None:
            raise PreconditionerError("preconditioner not factorised")
        return self.lu.solve(np.asarray(v, dtype=complex))

    __call__ = apply

    def refactor(self, op: SystemOperator):
        """Recombine values at the operator's current frequency and factorise."""
        if self.kind == "none":
            self.frequency = op.frequency
            return
        if op.frequency is None:
            raise PreconditionerError("operator frequency not set")
        t0 = time.perf_counter()
        zs = op.surface_impedances(op.frequency)
        data = np.zeros(self.pattern.nnz, dtype=complex)
        for z, part in zip(zs, self.parts[:-1]):
            data += z * part
        data += op.coef * self.parts[-1]
        Q = sp.csr_matrix((data, self.pattern.indices, self.pattern.indptr), shape=self.pattern.shape)
        self.Q = Q.tocsc()
        try:
            self.lu = spla.splu(self.Q, permc_spec="COLAMD")
        except RuntimeError as exc:
            raise PreconditionerError(
                f"{self.kind} preconditioner singular at f={op.frequency:g} Hz: {exc}"
            ) from exc
        piv = np.abs(self.lu.U.diagonal())
        self.min_pivot = float(piv.min()) if len(piv) else np.nan
        if len(piv) and not self.min_pivot > _PIVOT_RTOL * piv.max():
            raise PreconditionerError(
                f"{self.kind} preconditioner singular at f={op.frequency:g} Hz "
                f"(smallest pivot {self.min_pivot:.3e}, largest {piv.max():.3e})"
            )
        self.frequency = op.frequency
        dt = time.perf_counter() - t0
        if self.n_factorizations == 0:
            self.setup_seconds += dt
        self.n_factorizations += 1
        logger.debug("%s refactor at %g Hz: %.3fs, min pivot %.3e",
                     self.kind, op.frequency, dt, self.min_pivot)


def inductive_diag_p(op: SystemOperator) -> sp.csr_matrix:
    """``sum_t B_t diag(P_kk) B_t^T`` (loop space)."""
    d = sp.diags(op.self_P())
    return sum(b @ d @ bt for b, bt in zip(op.B, op.Bt)).tocsr()


def inductive_diag_l(op: SystemOperator) -> sp.csr_matrix:
    """``M_e diag(L_e) M_e^T`` with freshly computed edge self terms."""
    Me = op.loops.edge_part(op.n_edges)
    return (Me @ sp.diags(op.edge_self_inductance()) @ Me.T).tocsr()


def build_preconditioner(op: SystemOperator, kind: str = "diag-p") -> PrecondFactor:
    """Frequency-invariant part of the preconditioner; call ``refactor`` per frequency.

    When the operator already has a frequency set the first factorisation
    happens here and is included in ``setup_seconds``.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown preconditioner {kind!r}; choose from {KINDS}")
    if kind == "none":
        return PrecondFactor(kind, op.n_loops)
    t0 = time.perf_counter()
    ind = inductive_diag_p(op) if kind == "diag-p" else inductive_diag_l(op)
    pieces = list(op.R_parts) + [ind]
    pattern = abs(pieces[0])
    for x in pieces[1:]:
        pattern = pattern + abs(x)
    pattern = pattern.tocsr()
    pattern.sort_indices()
    parts = [_aligned(pattern, x) for x in pieces]
    build = time.perf_counter() - t0
    pf = PrecondFactor(kind, op.n_loops, pattern, parts, setup_seconds=build, build_seconds=build)
    if op.frequency is not None:
        pf.refactor(op)
    return pf


def source_matrix(op: SystemOperator, kind: str) -> sp.csr_matrix:
    """Edge-space inductive matrix before the loop mapping (for structure checks)."""
    if kind == "diag-p":
        d = sp.diags(op.self_P())
        return sum(a @ d @ a.T for a in op.mapping.A).tocsr()
    if kind == "diag-l":
        return sp.diags(op.edge_self_inductance()).tocsr()
    raise ValueError(kind)
