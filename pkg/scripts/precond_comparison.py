"""GMRES iterations and setup time for diag-p, diag-l and no preconditioner."""

import argparse

from rlx.benchmarks import precond_comparison


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--freqs", type=float, nargs="+", default=[1e3, 1e6, 1e8, 1e9, 1e10])
    ap.add_argument("--tol", type=float, default=1e-6)
    ap.add_argument("--meshes", nargs="+", default=["coils", "wire"], choices=["coils", "wire"])
    a = ap.parse_args()
    cmp = precond_comparison(tuple(a.freqs), a.tol, mesh_names=tuple(a.meshes))
    print(f"{'mesh':>6} {'f [Hz]':>9} | {'diag-p':>7} {'diag-l':>7} {'none':>7} | "
          f"{'setup p [s]':>11} {'setup l [s]':>11}")
    for r in cmp.rows:
        it = [f"{r.iterations[k]}{'' if r.converged[k] else '*'}" for k in ("diag-p", "diag-l", "none")]
        print(f"{r.mesh:>6} {r.frequency:9.1e} | {it[0]:>7} {it[1]:>7} {it[2]:>7} | "
              f"{r.setup_seconds['diag-p']:11.4f} {r.setup_seconds['diag-l']:11.4f}")
    print("* not converged within the iteration limit")
    print(f"iteration ordering holds: {cmp.ordered()}; setup ordering holds: {cmp.setup_ordered()}")


if __name__ == "__main__":
    main()
