"""Restarted GMRES for several right-hand sides sharing one Krylov basis.

Each restart cycle seeds the basis with the (deflated) preconditioned
residual block of the unconverged columns, then grows it one vector per
iteration (band Arnoldi): the next operator application always acts on
the oldest basis vector not yet expanded. Every column solves its own
small least-squares problem over the shared basis.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

logger = logging.getLogger(__name__)

LOW_FREQ_SWITCH = 1e6
_DEFLATE = 1e-12
_REORTH = 1e-8


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolveConfig:
    restart: int = 50
    tol_high: float = 1e-4  # f > 1 MHz
    tol_low: float = 1e-6  # f <= 1 MHz
    max_iters: int = 2000

    def __post_init__(self):
        if self.restart < 1:
            raise ValueError("restart must be >= 1")
        for t in (self.tol_high, self.tol_low):
            if not 0 < t < 1:
                raise ValueError("tolerances must lie in (0, 1)")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")

    def tol_for(self, f: float) -> float:
        return self.tol_high if f > LOW_FREQ_SWITCH else self.tol_low


@dataclass
class SolveReport:
    iterations: np.ndarray  # per column
    converged: np.ndarray
    precond_residual: np.ndarray  # ||M^-1 (b - A x)|| / ||M^-1 b||
    residual: np.ndarray  # true ||b - A x|| / ||b||
    n_mvm: int = 0
    seconds: float = 0.0
    tol: float = 0.0
    history: list = field(default_factory=list)  # per column: residual estimates per iteration

    @property
    def all_converged(self) -> bool:
        return bool(np.all(self.converged))


def _orthogonalize(V: np.ndarray, k: int, w: np.ndarray):
    """MGS against V[:, :k] with a second pass when orthogonality is lost."""
    h = np.zeros(k, dtype=complex)
    for _ in range(2):
        for i in range(k):
            c = np.vdot(V[:, i], w)
            h[i] += c
            w = w - c * V[:, i]
        nw = np.linalg.norm(w)
        if k == 0 or nw == 0:
            break
        if np.max(np.abs(V[:, :k].conj().T @ w)) <= _REORTH * nw:
            break
    return h, w


def gmres_mrhs(
    A: Callable[[np.ndarray], np.ndarray],
    M: Callable[[np.ndarray], np.ndarray] | None,
    B: np.ndarray,
    cfg: SolveConfig = SolveConfig(),
    tol: float | None = None,
    x0: np.ndarray | None = None,
) -> tuple[np.ndarray, SolveReport]:
    """Solve ``A X = B`` with left preconditioner ``M`` (``M(v) ~ A^-1 v``).

    Convergence is judged on the preconditioned relative residual; the true
    residual is recomputed once at the end.
    """
    t0 = time.perf_counter()
    tol = cfg.tol_high if tol is None else tol
    B = np.asarray(B, dtype=complex)
    squeeze = B.ndim == 1
    B = B.reshape(B.shape[0], -1)
    n, s = B.shape
    if np.any(np.linalg.norm(B, axis=0) == 0):
        raise SolverError("right-hand side column with zero norm")
    M = M or (lambda v: np.array(v, dtype=complex, copy=True))
    X = np.zeros_like(B) if x0 is None else np.array(x0, dtype=complex).reshape(n, s)
    n_mvm = 0

    def apply_A(v):
        nonlocal n_mvm
        n_mvm += 1
        return np.asarray(A(v)).reshape(v.shape)

    def op(v):
        return M(apply_A(v))

    bnorm = np.linalg.norm(M(B).reshape(n, s), axis=0)
    iters = np.zeros(s, dtype=int)
    done = np.zeros(s, dtype=bool)
    est = np.ones(s)
    history = [[] for _ in range(s)]
    total = 0

    while total < cfg.max_iters and not done.all():
        act = np.flatnonzero(~done)
        R = B[:, act] if not X[:, act].any() else B[:, act] - apply_A(X[:, act])
        R = M(R).reshape(n, -1)
        rnorm = np.linalg.norm(R, axis=0) / bnorm[act]
        newly = rnorm <= tol
        done[act[newly]] = True
        est[act] = rnorm
        act = act[~newly]
        R = R[:, ~newly]
        if len(act) == 0:
            break

        # seed the basis with an orthonormal basis of the residual block
        m_max = cfg.restart
        V = np.zeros((n, m_max + len(act) + 1), dtype=complex)
        G = np.zeros((m_max + len(act) + 1, len(act)), dtype=complex)  # residual coords
        nv = 0
        for c in range(len(act)):
            h, w = _orthogonalize(V, nv, R[:, c].copy())
            G[:nv, c] = h
            nw = np.linalg.norm(w)
            if nw > _DEFLATE * np.linalg.norm(R[:, c]):
                V[:, nv] = w / nw
                G[nv, c] = nw
                nv += 1
        H = np.zeros((m_max + len(act) + 1, m_max), dtype=complex)
        live = np.ones(len(act), dtype=bool)
        Y = [None] * len(act)
        j = 0  # number of expanded basis vectors
        while j < min(nv, m_max) and total < cfg.max_iters:
            w = op(V[:, j])
            h, w = _orthogonalize(V, nv, w)
            H[:nv, j] = h
            nw = np.linalg.norm(w)
            if nw > _DEFLATE * max(np.linalg.norm(h), 1e-300) and nv < V.shape[1]:
                V[:, nv] = w / nw
                H[nv, j] = nw
                nv += 1
            j += 1
            total += 1
            rows = nv
            for c in np.flatnonzero(live):
                y, *_ = np.linalg.lstsq(H[:rows, :j], G[:rows, c], rcond=None)
                res = np.linalg.norm(G[:rows, c] - H[:rows, :j] @ y) / bnorm[act[c]]
                Y[c] = y
                iters[act[c]] += 1
                est[act[c]] = res
                history[act[c]].append(res)
                if res <= tol:
                    live[c] = False
                    X[:, act[c]] += V[:, :j] @ y
                    done[act[c]] = True
            logger.log(5, "gmres it %d: residuals %s", total, est[act])
            if not live.any():
                break
            if j >= nv:  # Krylov space exhausted: the solution is exact in it
                break
        for c in np.flatnonzero(live):
            if Y[c] is not None:
                X[:, act[c]] += V[:, : len(Y[c])] @ Y[c]

    AX = apply_A(X)
    true_res = np.linalg.norm(B - AX, axis=0) / np.linalg.norm(B, axis=0)
    pres = np.linalg.norm(M(B - AX).reshape(n, s), axis=0) / bnorm
    converged = done | (pres <= tol)
    for c in np.flatnonzero(converged & (pres > 10 * tol)):
        logger.warning("gmres column %d: recomputed residual %.3e exceeds 10x tol", c, pres[c])
    for c in np.flatnonzero(~converged):
        logger.warning("gmres column %d not converged: residual %.3e after %d iterations",
                       c, pres[c], iters[c])
    report = SolveReport(
        iterations=iters, converged=converged, precond_residual=pres, residual=true_res,
        n_mvm=n_mvm, seconds=time.perf_counter() - t0, tol=tol, history=history,
    )
    return (X[:, 0] if squeeze else X), report
