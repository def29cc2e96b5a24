"""Minimum Rabi-frequency separation over MW directions and its local optima."""

import argparse
from pathlib import Path

import numpy as np

from vpdr.frames import LABELS
from vpdr.mw_optimizer import optimize_direction, write_map_csv


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/fig3b")
    ap.add_argument("--map-step-deg", type=float, default=0.25)
    ap.add_argument("--min-rabi-frac", type=float, default=0.65)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    step = args.map_step_deg
    write_map_csv(out / "separation_map.csv", np.arange(0, 90 + step / 2, step), np.arange(0, 45 + step / 2, step))
    for tag, frac in (("unconstrained", None), ("constrained", args.min_rabi_frac)):
        best = optimize_direction(constraint_min_rabi_frac=frac, top=5)
        print(tag)
        for r in best:
            i, j, n = r.limiting_pair
            print(
                f"  theta={r.theta_deg:7.3f}  phi={r.phi_deg:7.3f}  sep={100 * r.min_separation_frac:5.2f}%  "
                f"min Omega_i={min(r.rabi_fracs):.3f} Omega_max  limited by {LABELS[i]} vs {n:g} x {LABELS[j]}"
            )


if __name__ == "__main__":
    main()
