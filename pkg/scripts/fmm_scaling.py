"""FMM error and MVM time versus N, and error versus expansion order."""

import argparse

from rlx.benchmarks import fmm_scaling


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", type=int, nargs="+", default=[2500, 5000, 10000, 20000, 40000])
    ap.add_argument("--orders", type=int, nargs="+", default=[4, 6, 8, 10])
    ap.add_argument("--leaf-size", type=int, default=64)
    ap.add_argument("--check-limit", type=int, default=20000,
                    help="skip the O(N^2) direct check above this N")
    a = ap.parse_args()
    s = fmm_scaling(a.sizes, 8, a.leaf_size, check_error=[n <= a.check_limit for n in a.sizes])
    print(f"{'N':>7} {'build [s]':>10} {'MVM [s]':>9} {'us/point':>9} {'max rel err':>12}")
    for n, b, t, e in zip(s.sizes, s.build_seconds, s.seconds, s.errors):
        print(f"{n:7d} {b:10.3f} {t:9.4f} {1e6 * t / n:9.2f} {e:12.2e}")
    print()
    print(f"{'order':>5} {'max rel err (N=5000)':>22} {'MVM [s]':>9}")
    for p in a.orders:
        r = fmm_scaling((5000,), p, a.leaf_size)
        print(f"{p:5d} {r.errors[0]:22.2e} {r.seconds[0]:9.4f}")


if __name__ == "__main__":
    main()
