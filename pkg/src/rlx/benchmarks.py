"""Reproducible benchmark runs shared by the acceptance tests and scripts/."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import meshes
from .extraction import RlResult, SweepConfig, l2_diff, log_frequencies, run_sweep
from .fmm import build_tree, direct_sum, fmm_mvm, point_near_block
from .krylov import SolveConfig, gmres_mrhs
from .preconditioner import build_preconditioner
from .reference import (
    WireSpec, dc_plate_resistance, neumann_mutual, wire_internal_impedance, wire_reference_L,
)
from .system_operator import SystemOperator


@dataclass
class WireBenchmark:
    result: RlResult
    R_ref: np.ndarray
    L_ref: np.ndarray
    diff_R: float
    diff_L: float
    seconds: float


def wire_benchmark(radius=5e-6, length=50e-6, sigma=5.96e7, n_circ=25, n_axial=20,
                   npoints=25, esi_model="coth", precond="diag-p") -> WireBenchmark:
    """Round wire swept 1 kHz..10 GHz against the Bessel-function reference.

    The external inductance is not part of the analytic model, so the
    reference L adds a constant fitted at the lowest frequency.
    """
    t0 = time.perf_counter()
    mesh = meshes.wire(radius=radius, length=length, n_circ=n_circ, n_axial=n_axial, sigma=sigma)
    res = run_sweep(mesh, SweepConfig(log_frequencies(1e3, 1e10, npoints),
                                      esi_model=esi_model, precond=precond))
    spec = WireSpec(radius, length, sigma)
    f = res.frequencies
    R, L = res.series(0, 0, "R"), res.series(0, 0, "L")
    R_ref = np.asarray(wire_internal_impedance(spec, f)).real
    L_ref = wire_reference_L(spec, f, L[0], f[0])
    return WireBenchmark(res, R_ref, L_ref, l2_diff(R, R_ref), l2_diff(L, L_ref),
                         time.perf_counter() - t0)


@dataclass
class PlateBenchmark:
    R: float
    R_ref: float
    rel_error: float
    n_panels: int


def dc_plate(length=100e-6, width=10e-6, thickness=2e-6, nx=20, ny=4, f=1.0) -> PlateBenchmark:
    """10:1 bar driven end to end at (almost) DC."""
    mesh = meshes.plate(length=length, width=width, thickness=thickness, nx=nx, ny=ny)
    res = run_sweep(mesh, SweepConfig((f,)))
    R = float(res.R[0, 0, 0])
    ref = dc_plate_resistance(length, width, mesh.conductors[0].sigma, thickness)
    return PlateBenchmark(R, ref, abs(R - ref) / ref, mesh.n_panels)


@dataclass
class CoilBenchmark:
    result: RlResult
    M_ref: float
    M_rel_error: np.ndarray  # per frequency
    reciprocity: float  # max |L12 - L21| / |L12|
    min_L_eig: float
    R_monotone: bool


def coil_benchmark(npoints=8, **coil_kw) -> CoilBenchmark:
    """Two stacked square coils; mutual L against the Neumann filament formula."""
    mesh = meshes.coil_pair(**coil_kw)
    res = run_sweep(mesh, SweepConfig(log_frequencies(1e3, 1e10, npoints)))
    outer = coil_kw.get("outer", 100e-6)
    width = coil_kw.get("width", 5e-6)
    height = coil_kw.get("height", 5e-6)
    spacing = coil_kw.get("spacing", 5e-6)
    gap = coil_kw.get("gap", 2e-6)
    zc = height / 2
    a = meshes.coil_centerline(outer, width, zc, gap)
    b = meshes.coil_centerline(outer, width, zc + height + spacing, gap)
    M = neumann_mutual(a, b)
    L = res.L
    L12, L21 = L[:, 0, 1], L[:, 1, 0]
    R11, R22 = res.R[:, 0, 0], res.R[:, 1, 1]
    return CoilBenchmark(
        result=res,
        M_ref=M,
        M_rel_error=(L12 - M) / M,
        reciprocity=float(np.max(np.abs(L12 - L21) / np.abs(L12))),
        min_L_eig=float(min(np.linalg.eigvalsh((x + x.T) / 2).min() for x in L)),
        R_monotone=bool(np.all(np.diff(R11) > 0) and np.all(np.diff(R22) > 0)),
    )


@dataclass
class FmmScaling:
    sizes: tuple
    errors: list
    seconds: list  # best-of-repeats MVM wall time
    build_seconds: list

    @property
    def growth(self) -> float:
        return self.seconds[-1] / self.seconds[0]


def fmm_scaling(sizes=(5000, 10000), order=8, leaf_size=64, repeats=3, seed=0,
                check_error=(True, True)) -> FmmScaling:
    """MVM error against direct summation and time growth with N.

    The error is ``max|y_fmm - y_direct| / max|y_direct|`` for standard
    normal charges at uniformly random points in the unit cube.
    """
    rng = np.random.default_rng(seed)
    errors, secs, builds = [], [], []
    for n, check in zip(sizes, check_error):
        pts = rng.random((n, 3))
        q = rng.normal(size=n)
        t0 = time.perf_counter()
        tree = build_tree(pts, leaf_size, order)
        near = point_near_block(tree)
        builds.append(time.perf_counter() - t0)
        best = np.inf
        for _ in range(repeats):
            t0 = time.perf_counter()
            y = fmm_mvm(tree, near, q)
            best = min(best, time.perf_counter() - t0)
        secs.append(best)
        if check:
            ref = direct_sum(pts, q)
            errors.append(float(np.max(np.abs(y - ref)) / np.max(np.abs(ref))))
        else:
            errors.append(float("nan"))
    return FmmScaling(tuple(sizes), errors, secs, builds)


@dataclass
class PrecondRow:
    mesh: str
    frequency: float
    iterations: dict  # kind -> max iterations over ports
    converged: dict
    setup_seconds: dict


@dataclass
class PrecondComparison:
    rows: list = field(default_factory=list)

    def ordered(self) -> bool:
        return all(r.iterations["diag-p"] <= r.iterations["diag-l"] <= r.iterations["none"]
                   for r in self.rows)

    def setup_ordered(self) -> bool:
        return all(r.setup_seconds["diag-p"] <= r.setup_seconds["diag-l"] for r in self.rows)


def precond_comparison(frequencies=(1e3, 1e9, 1e10), tol=1e-6, kinds=("diag-p", "diag-l", "none"),
                       mesh_names=("coils", "wire"), setup_repeats=3) -> PrecondComparison:
    """GMRES iterations at a fixed relative residual for each preconditioner.

    Setup time is the best of ``setup_repeats`` builds (frequency-invariant
    part plus the first factorisation).
    """
    makers = {"coils": meshes.coil_pair, "wire": meshes.wire}
    out = PrecondComparison()
    cfg = SolveConfig()
    for name in mesh_names:
        op = SystemOperator(makers[name]())
        for f in frequencies:
            op.set_frequency(f)
            its, conv, setup = {}, {}, {}
            for kind in kinds:
                pfs = [build_preconditioner(op, kind) for _ in range(setup_repeats)]
                setup[kind] = min(p.setup_seconds for p in pfs)
                _, rep = gmres_mrhs(op.mvm, pfs[0].apply, op.excitation, cfg, tol=tol)
                its[kind] = int(rep.iterations.max())
                conv[kind] = rep.all_converged
            out.rows.append(PrecondRow(name, f, its, conv, setup))
    return out
