"""Frequency sweep: excite ports, solve, convert the port admittance to R and L."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import SurfaceMesh, load_mesh
from .krylov import SolveConfig, SolveReport, gmres_mrhs
from .preconditioner import PrecondFactor, build_preconditioner
from .surface_impedance import skin_depth
from .system_operator import FmmConfig, SystemOperator

logger = logging.getLogger(__name__)

CSV_HEADER = "freq_hz, port_i, port_j, R_ohm, L_henry, iterations, residual"
_COND_LIMIT = 1e13


class ExtractionError(RuntimeError):
    pass


def log_frequencies(fstart: float, fstop: float, npoints: int) -> tuple[float, ...]:
    if npoints < 1:
        raise ValueError("need at least one frequency point")
    if not (0 < fstart <= fstop):
        raise ValueError("need 0 < fstart <= fstop")
    if npoints == 1:
        return (float(fstart),)
    return tuple(float(f) for f in np.logspace(np.log10(fstart), np.log10(fstop), npoints))


@dataclass(frozen=True)
class SweepConfig:
    frequencies: tuple[float, ...]
    ports: tuple[str, ...] | str = "all"
    solve: SolveConfig = SolveConfig()
    fmm: FmmConfig = FmmConfig()
    precond: str = "diag-p"
    esi_model: str = "coth"
    tol_override: float | None = None  # one tolerance for every frequency

    def __post_init__(self):
        f = np.asarray(self.frequencies, dtype=float)
        if f.size == 0 or np.any(f <= 0):
            raise ValueError("frequencies must be positive")
        if np.any(np.diff(f) <= 0):
            raise ValueError("frequencies must be strictly increasing")

    def tol_for(self, f: float) -> float:
        return self.tol_override if self.tol_override is not None else self.solve.tol_for(f)


@dataclass
class RlResult:
    port_names: tuple[str, ...]
    frequencies: np.ndarray
    Z: np.ndarray  # (n_f, n_ports, n_ports) complex
    reports: list[SolveReport]
    delta_s: float
    summary: dict = field(default_factory=dict)
    precond_setup: list[float] = field(default_factory=list)
    columns: tuple[int, ...] = ()  # solver column of each reported port

    @property
    def R(self) -> np.ndarray:
        return self.Z.real

    @property
    def L(self) -> np.ndarray:
        return self.Z.imag / (2 * np.pi * self.frequencies)[:, None, None]

    def series(self, i: str | int, j: str | int, what: str = "R") -> np.ndarray:
        ii = self.port_names.index(i) if isinstance(i, str) else i
        jj = self.port_names.index(j) if isinstance(j, str) else j
        return getattr(self, what)[:, ii, jj]


def rl_from_impedance(Z, omega: float):
    """``(R, L)`` with ``L = None`` when ``omega == 0``."""
    Z = np.asarray(Z)
    if omega < 0:
        raise ValueError("omega must be non-negative")
    if omega == 0:
        return Z.real.copy(), None
    return Z.real.copy(), Z.imag / omega


def l2_diff(F, F_ref) -> float:
    """``sqrt(sum |F - F_ref|^2 / sum |F_ref|^2)``."""
    F = np.asarray(F)
    F_ref = np.asarray(F_ref)
    if F.shape != F_ref.shape or F.size == 0:
        raise ValueError("series must be non-empty and of equal length")
    den = np.sum(np.abs(F_ref) ** 2)
    if den == 0:
        raise ValueError("reference series has zero norm")
    return float(np.sqrt(np.sum(np.abs(F - F_ref) ** 2) / den))


def solve_frequency(op: SystemOperator, pf: PrecondFactor, f: float, solve: SolveConfig,
                    tol: float | None = None):
    """Port impedance matrix at ``f``; the preconditioner is refactorised here."""
    if op.n_ports == 0:
        raise ExtractionError("mesh defines no ports")
    op.set_frequency(f)
    t0 = time.perf_counter()
    pf.refactor(op)
    setup = time.perf_counter() - t0
    tol = solve.tol_for(f) if tol is None else tol
    E = op.excitation
    X, report = gmres_mrhs(op.mvm, pf.apply, E, solve, tol=tol)
    # E^T X + X^T (E - Z X): symmetric, and its error is quadratic in the
    # residual, which keeps Im(Z)/w meaningful when w L << R
    Y = op.port_currents(X) + X.T @ (E - op.mvm(X))
    cond = np.linalg.cond(Y)
    if not np.isfinite(cond) or cond > _COND_LIMIT:
        raise ExtractionError(f"singular port admittance at f={f:g} Hz (cond ~ {cond:.3e})")
    Z = np.linalg.inv(Y)
    logger.info("f=%.4g Hz: precond %.3fs, iterations %s, residual %s",
                f, setup, report.iterations.tolist(),
                np.array2string(report.residual, precision=2))
    return Z, report, setup


def run_sweep(mesh: SurfaceMesh | str | Path, cfg: SweepConfig,
              operator: SystemOperator | None = None) -> RlResult:
    """Build everything once, then solve every frequency in ``cfg``."""
    t0 = time.perf_counter()
    if not isinstance(mesh, SurfaceMesh):
        mesh = load_mesh(mesh)
    op = operator or SystemOperator(mesh, cfg.fmm, cfg.esi_model)
    names = op.graph.port_names
    if cfg.ports == "all":
        sel = list(range(len(names)))
    else:
        missing = [p for p in cfg.ports if p not in names]
        if missing:
            raise ExtractionError(f"unknown port(s): {', '.join(missing)}")
        sel = [names.index(p) for p in cfg.ports]
    pf = build_preconditioner(op, cfg.precond)
    near_id = id(op.near)
    Zs, reports, setups = [], [], []
    for f in cfg.frequencies:
        try:
            Z, rep, setup = solve_frequency(op, pf, f, cfg.solve, cfg.tol_for(f))
        except Exception as exc:
            raise ExtractionError(f"at f={f:g} Hz: {exc}") from exc
        if id(op.near) != near_id:
            raise ExtractionError("near-field block was rebuilt during the sweep")
        Zs.append(Z[np.ix_(sel, sel)])
        reports.append(rep)
        setups.append(setup)
    fmax = max(cfg.frequencies)
    delta = min(skin_depth(m, fmax) for m in mesh.conductors)
    iters = np.concatenate([r.iterations for r in reports])
    summary = {
        "N_p": op.n_panels,
        "N_e": op.n_edges,
        "N_l": op.n_loops,
        "ports": [names[k] for k in sel],
        "delta_s_m": delta,
        "wall_time_s": round(time.perf_counter() - t0, 3),
        "peak_near_nnz": op.near.nnz,
        "fmm_boxes": op.tree.n_boxes,
        "precond": cfg.precond,
        "precond_setup_s": round(pf.setup_seconds, 4),
        "iterations_min": int(iters.min()),
        "iterations_max": int(iters.max()),
        "iterations_mean": float(np.mean(iters)),
        "all_converged": all(r.all_converged for r in reports),
    }
    return RlResult(tuple(names[k] for k in sel), np.array(cfg.frequencies), np.array(Zs),
                    reports, delta, summary, setups, tuple(sel))


def format_csv(result: RlResult) -> str:
    lines = [CSV_HEADER]
    n = len(result.port_names)
    R, L = result.R, result.L
    cols = result.columns or tuple(range(n))
    for fi, f in enumerate(result.frequencies):
        rep = result.reports[fi]
        for i in range(n):
            for j in range(n):
                lines.append(", ".join([
                    f"{f:.6e}", result.port_names[i], result.port_names[j],
                    f"{R[fi, i, j]:.10e}", f"{L[fi, i, j]:.10e}",
                    str(int(rep.iterations[cols[j]])), f"{rep.residual[cols[j]]:.3e}",
                ]))
    return "\n".join(lines) + "\n"


def write_csv(result: RlResult, path):
    Path(path).write_text(format_csv(result))


def format_summary(result: RlResult, include_timing: bool = True) -> str:
    s = dict(result.summary)
    if not include_timing:
        s.pop("wall_time_s", None)
        s.pop("precond_setup_s", None)
    return json.dumps(s, indent=2)


def dense_port_impedance(op: SystemOperator, f: float, P: np.ndarray | None = None) -> np.ndarray:
    """``Z_port`` from an explicitly assembled loop matrix and a direct solve."""
    op.set_frequency(f)
    Z = op.dense_matrix(P)
    E = op.excitation
    X = np.linalg.solve(Z, E)
    return np.linalg.inv(op.port_currents(X))


def equivalence_check(op: SystemOperator, frequencies, tol: float = 1e-10) -> float:
    """Largest relative ``Z_port`` gap between the fast path and the dense solve."""
    pf = build_preconditioner(op, "diag-p")
    P = op.dense_P()
    worst = 0.0
    for f in frequencies:
        Zf, rep, _ = solve_frequency(op, pf, f, SolveConfig(), tol=tol)
        Zd = dense_port_impedance(op, f, P)
        worst = max(worst, float(np.linalg.norm(Zf - Zd) / np.linalg.norm(Zd)))
    return worst
