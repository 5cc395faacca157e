"""DC resistance of a 10:1 bar under mesh refinement."""

from rlx.benchmarks import dc_plate


def main():
    print(f"{'nx x ny':>8} {'N_p':>6} {'R [ohm]':>13} {'rel err':>9}")
    for nx, ny in ((10, 2), (20, 4), (40, 8)):
        b = dc_plate(nx=nx, ny=ny)
        print(f"{nx:>3} x {ny:<3} {b.n_panels:6d} {b.R:13.6e} {b.rel_error:9.2e}")
    print(f"analytic length/(sigma*width*thickness) = {b.R_ref:.6e}")


if __name__ == "__main__":
    main()
