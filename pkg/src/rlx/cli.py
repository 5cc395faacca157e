"""``rlx`` command line: extract, reference, mesh-check, selftest."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

log = logging.getLogger("rlx")


class ConfigError(ValueError):
    pass


# flag name -> (type, default); shared by the parser and the config file
OPTIONS = {
    "mesh": (str, None),
    "out": (str, None),
    "fstart": (float, 1e3),
    "fstop": (float, 1e10),
    "npoints": (int, 25),
    "ports": (str, "all"),
    "tol-high": (float, 1e-4),
    "tol-low": (float, 1e-6),
    "restart": (int, 50),
    "max-iters": (int, 2000),
    "precond": (str, "diag-p"),
    "fmm-order": (int, 8),
    "leaf-size": (int, 64),
    "separation": (int, 2),
    "direct": (bool, False),
    "esi-model": (str, "coth"),
    "threads": (int, None),
    "summary": (str, None),
    "radius": (float, 5e-6),
    "length": (float, 50e-6),
    "sigma": (float, 5.96e7),
    "dump-mapping": (str, None),
    "dump-loops": (str, None),
    "null-check": (bool, False),
}


@dataclass
class RunConfig:
    command: str
    values: dict = field(default_factory=dict)
    verbosity: int = 0
    explicit: frozenset = frozenset()  # keys set by a flag or the config file

    def __getitem__(self, key):
        return self.values[key]


def _to_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def read_config(path) -> dict:
    """``key = value`` lines; ``#`` comments; keys are flag names."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("_", "-")
        if key not in OPTIONS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        typ = OPTIONS[key][0]
        try:
            out[key] = _to_bool(value) if typ is bool else typ(value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {value!r}") from exc
    return out


def _add(p: argparse.ArgumentParser, *names, help=""):
    for name in names:
        typ, _ = OPTIONS[name]
        if typ is bool:
            p.add_argument(f"--{name}", action="store_const", const=True, default=None, help=help)
        else:
            p.add_argument(f"--{name}", type=typ, default=None, help=help)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="count", default=0,
                        help="repeat for more detail (-vv traces solver iterations)")
    common.add_argument("--config", help="optional key = value file; flags override it")
    _add(common, "threads", help="BLAS/OpenMP threads (effective when set before numpy loads)")

    parser = argparse.ArgumentParser(prog="rlx", description="Broadband RL extraction for surface meshes.")
    sub = parser.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("extract", parents=[common], help="frequency sweep to CSV")
    _add(ex, "mesh", help="mesh file, or builtin:<name>")
    _add(ex, "out", help="CSV output path (default: stdout)")
    _add(ex, "fstart", "fstop", "npoints")
    _add(ex, "ports", help="'all' or comma-separated port names")
    _add(ex, "tol-high", help="relative residual above 1 MHz")
    _add(ex, "tol-low", help="relative residual at or below 1 MHz")
    _add(ex, "restart", "max-iters")
    ex.add_argument("--precond", choices=("diag-p", "diag-l", "none"), default=None)
    _add(ex, "fmm-order", "leaf-size", "separation")
    _add(ex, "direct", help="dense potential matrix instead of the FMM far field")
    ex.add_argument("--esi-model", choices=("coth", "exp"), default=None)
    _add(ex, "summary", help="write the summary block here instead of stderr")

    ref = sub.add_parser("reference", parents=[common], help="analytic round-wire series as CSV")
    _add(ref, "radius", "length", "sigma", "fstart", "fstop", "npoints", "out")

    mc = sub.add_parser("mesh-check", parents=[common], help="validate a mesh and print counts")
    _add(mc, "mesh", help="mesh file, or builtin:<name>")
    _add(mc, "dump-mapping", help="write the A1/A2/A3 entries (COO) to this file")
    _add(mc, "dump-loops", help="write the loop branch lists to this file")
    _add(mc, "null-check", help="report the smallest singular value of the loop-to-panel map")

    st = sub.add_parser("selftest", parents=[common], help="dense-oracle checks on built-in meshes")
    _add(st, "fmm-order", "leaf-size")
    return parser


def resolve(args: argparse.Namespace) -> RunConfig:
    file_values = read_config(args.config) if args.config else {}
    values, explicit = {}, set()
    for name, (_, default) in OPTIONS.items():
        attr = name.replace("-", "_")
        if getattr(args, attr, None) is not None:
            values[name] = getattr(args, attr)
            explicit.add(name)
        elif name in file_values:
            values[name] = file_values[name]
            explicit.add(name)
        else:
            values[name] = default
    return RunConfig(args.command, values, args.verbose, frozenset(explicit))


def _setup_logging(verbosity: int):
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else 5
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    logging.getLogger("rlx").setLevel(level)


def _load(spec: str | None):
    from .geometry import load_mesh
    from .meshes import BUILTIN

    if not spec:
        raise ConfigError("--mesh is required")
    if spec.startswith("builtin:"):
        name = spec.split(":", 1)[1]
        if name not in BUILTIN:
            raise ConfigError(f"unknown built-in mesh {name!r}; have {', '.join(BUILTIN)}")
        return BUILTIN[name]()
    return load_mesh(spec)


def _emit(text: str, path: str | None):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_extract(cfg: RunConfig) -> int:
    from .extraction import SweepConfig, format_csv, format_summary, log_frequencies, run_sweep
    from .krylov import SolveConfig
    from .system_operator import FmmConfig

    mesh = _load(cfg["mesh"])
    ports = cfg["ports"]
    ports = "all" if ports == "all" else tuple(p.strip() for p in ports.split(",") if p.strip())
    sweep = SweepConfig(
        frequencies=log_frequencies(cfg["fstart"], cfg["fstop"], cfg["npoints"]),
        ports=ports,
        solve=SolveConfig(cfg["restart"], cfg["tol-high"], cfg["tol-low"], cfg["max-iters"]),
        fmm=FmmConfig(cfg["fmm-order"], cfg["leaf-size"], cfg["separation"], cfg["direct"]),
        precond=cfg["precond"],
        esi_model=cfg["esi-model"],
    )
    result = run_sweep(mesh, sweep)
    _emit(format_csv(result), cfg["out"])
    summary = format_summary(result) + "\n"
    if cfg["summary"]:
        Path(cfg["summary"]).write_text(summary)
    else:
        sys.stderr.write(summary)
    return 0 if result.summary["all_converged"] else 3


def cmd_reference(cfg: RunConfig) -> int:
    import numpy as np

    from .extraction import log_frequencies
    from .reference import WireSpec, wire_internal_impedance

    spec = WireSpec(cfg["radius"], cfg["length"], cfg["sigma"])
    f = np.array(log_frequencies(cfg["fstart"], cfg["fstop"], cfg["npoints"]))
    z = np.asarray(wire_internal_impedance(spec, f))
    lines = ["freq_hz, R_ohm, L_internal_henry"]
    lines += [f"{fi:.6e}, {zi.real:.10e}, {zi.imag / (2 * np.pi * fi):.10e}" for fi, zi in zip(f, z)]
    _emit("\n".join(lines) + "\n", cfg["out"])
    return 0


def cmd_mesh_check(cfg: RunConfig) -> int:
    from .basis_map import build_mapping
    from .geometry import build_branch_graph, build_connectivity, count_boundary_edges
    from .loop_analysis import build_loop_basis, dump_loops

    mesh = _load(cfg["mesh"])
    edges = build_connectivity(mesh)
    graph = build_branch_graph(mesh, edges)
    loops = build_loop_basis(graph)
    print(f"N_p={mesh.n_panels}")
    print(f"N_e={len(edges)}")
    print(f"N_l={loops.n_loops}")
    print(f"boundary_edges={count_boundary_edges(mesh)}")
    print(f"components={loops.n_components}")
    print("ports=" + (",".join(graph.port_names) or "-"))
    if cfg["dump-mapping"]:
        Path(cfg["dump-mapping"]).write_text(build_mapping(mesh, edges).coo_dump() + "\n")
    if cfg["dump-loops"]:
        Path(cfg["dump-loops"]).write_text(dump_loops(loops) + "\n")
    if cfg["null-check"]:
        from .system_operator import FmmConfig, SystemOperator, smallest_singular_value

        s = smallest_singular_value(SystemOperator(mesh, FmmConfig()))
        print(f"loop_map_min_singular={s:.3e}")
        if not s > 1e-10:
            print("warning: loop currents without panel current (zero-energy modes)", file=sys.stderr)
            return 1
    return 0


def cmd_selftest(cfg: RunConfig) -> int:
    from .extraction import equivalence_check
    from .meshes import BUILTIN
    from .system_operator import FmmConfig, SystemOperator

    freqs = (1e3, 1e7, 1e10)
    ok = True
    # small leaves so the far field is exercised on these small meshes
    leaf = cfg["leaf-size"] if "leaf-size" in cfg.explicit else 8
    for name, make in BUILTIN.items():
        mesh = make()
        op = SystemOperator(mesh, FmmConfig(order=cfg["fmm-order"], leaf_size=leaf))
        err = equivalence_check(op, freqs)
        passed = err <= 1e-5
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} {name}: N_p={mesh.n_panels} "
              f"max rel |Z_fmm - Z_dense| = {err:.2e}")
    return 0 if ok else 1


COMMANDS = {
    "extract": cmd_extract,
    "reference": cmd_reference,
    "mesh-check": cmd_mesh_check,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
    except (ConfigError, OSError) as exc:
        print(f"rlx: error: {exc}", file=sys.stderr)
        return 2
    if cfg["threads"]:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(cfg["threads"])
    _setup_logging(cfg.verbosity)
    try:
        return COMMANDS[cfg.command](cfg)
    except Exception as exc:  # surfaced with context, never a traceback by default
        if cfg.verbosity >= 2:
            raise
        print(f"rlx {cfg.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
