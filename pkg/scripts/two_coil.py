"""Two stacked square coils: R and L versus frequency, mutual L against Neumann."""

import argparse

import numpy as np

from rlx.benchmarks import coil_benchmark


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--npoints", type=int, default=8)
    ap.add_argument("--step", type=float, default=5e-6, help="target panel size along the coil [m]")
    ap.add_argument("--spacing", type=float, default=5e-6, help="vertical gap between coils [m]")
    a = ap.parse_args()
    b = coil_benchmark(npoints=a.npoints, step=a.step, spacing=a.spacing)
    res = b.result
    print(f"N_p={res.summary['N_p']}  N_l={res.summary['N_l']}  Neumann M={b.M_ref:.5e} H")
    print(f"{'f [Hz]':>10} {'R11':>11} {'R12':>11} {'L11':>11} {'L12':>11} {'L21':>11} {'dM':>8} {'its':>8}")
    for k, f in enumerate(res.frequencies):
        R, L = res.R[k], res.L[k]
        print(f"{f:10.3e} {R[0, 0]:11.4e} {R[0, 1]:11.4e} {L[0, 0]:11.4e} {L[0, 1]:11.4e} "
              f"{L[1, 0]:11.4e} {b.M_rel_error[k]:+8.2%} {str(res.reports[k].iterations.tolist()):>8}")
    print(f"max |L12-L21|/|L12| = {b.reciprocity:.2e}; min eig(L) = {b.min_L_eig:.3e}; "
          f"R monotone: {b.R_monotone}; max |dM| = {np.abs(b.M_rel_error).max():.2%}")


if __name__ == "__main__":
    main()
