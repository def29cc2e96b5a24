"""DQ Fourier amplitudes |a[n][2]| (n = 1/2, 1, 3/2, 2) against Omega/omega_L."""

import argparse
from pathlib import Path

import numpy as np

from vpdr.analytic import dq_first_quadrant_amplitudes
from vpdr.io import write_rows_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/fig2")
    ap.add_argument("--alpha-max", type=float, default=60.0)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for alpha in np.geomspace(0.5, args.alpha_max, 200):
        a = dq_first_quadrant_amplitudes(alpha)
        rows.append({"alpha": alpha, "n_0.5": a[0], "n_1": a[1], "n_1.5": a[2], "n_2": a[3]})
    write_rows_csv(out / "dq_amplitudes.csv", rows)
    print(f"wrote {out / 'dq_amplitudes.csv'}")


if __name__ == "__main__":
    main()
