"""Round-wire sweep against the Bessel reference; prints a per-frequency table."""

import argparse

from rlx.benchmarks import wire_benchmark
from rlx.surface_impedance import skin_depth


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n-circ", type=int, default=25)
    ap.add_argument("--n-axial", type=int, default=20)
    ap.add_argument("--npoints", type=int, default=25)
    ap.add_argument("--esi-model", choices=("coth", "exp"), default="coth")
    ap.add_argument("--precond", choices=("diag-p", "diag-l", "none"), default="diag-p")
    a = ap.parse_args()
    b = wire_benchmark(n_circ=a.n_circ, n_axial=a.n_axial, npoints=a.npoints,
                       esi_model=a.esi_model, precond=a.precond)
    res = b.result
    R, L = res.series(0, 0, "R"), res.series(0, 0, "L")
    sigma = 5.96e7
    print(f"{'f [Hz]':>10} {'a/delta':>8} {'R [ohm]':>12} {'R_ref':>12} {'L [H]':>12} {'L_ref':>12} {'its':>4}")
    for k, f in enumerate(res.frequencies):
        print(f"{f:10.3e} {5e-6 / skin_depth(sigma, f):8.3f} {R[k]:12.5e} {b.R_ref[k]:12.5e} "
              f"{L[k]:12.5e} {b.L_ref[k]:12.5e} {res.reports[k].iterations.max():4d}")
    print(f"N_p={res.summary['N_p']}  l2_diff(R)={b.diff_R:.4f}  l2_diff(L)={b.diff_L:.4f}  "
          f"wall {b.seconds:.2f}s")


if __name__ == "__main__":
    main()
