"""Self-calibrated inversion error versus MW amplitude and MW direction."""

import argparse
import os
from pathlib import Path

import numpy as np

from vpdr import io as vio
from vpdr.constants import mhz_to_rad
from vpdr.frames import angles_from_direction
from vpdr.inversion import robustness_sweep

HERE = Path(__file__).resolve().parent


def _max_db(points):
    out = []
    for p in points:
        if p.report is None:
            out.append(np.nan)
            continue
        out.append(max(abs(r.delta_b) for r in p.report.results) * 1e9)
    return np.array(out)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(HERE.parent / "configs" / "fig6.yaml"))
    ap.add_argument("--out", default="out/fig6")
    ap.add_argument("--span-deg", type=float, default=6.0)
    ap.add_argument("--step-deg", type=float, default=1.0)
    ap.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg, _ = vio.load_config(args.config)

    amps = np.arange(50.0, 160.0 + 1e-9, 2.5)
    pts = robustness_sweep(cfg, omega_max_values=mhz_to_rad(amps), threads=args.threads)
    vio.write_sweep_csv(out / "amplitude.csv", pts)
    for a, m in zip(amps, _max_db(pts)):
        print(f"Omega_max = {a:6.1f} MHz: max |dB| = {m:.3f} nT")

    th0, ph0 = angles_from_direction(cfg.mw_direction)
    offs = np.arange(-args.span_deg, args.span_deg + 1e-9, args.step_deg)
    angles = [(th0 + a, ph0 + b) for a in offs for b in offs]
    pts = robustness_sweep(cfg, mw_angles_deg=angles, threads=args.threads)
    vio.write_sweep_csv(out / "direction.csv", pts)
    worst = _max_db(pts)
    print(f"MW direction +-{args.span_deg} deg: {np.mean(worst < 10):.0%} of points below 10 nT")


if __name__ == "__main__":
    main()
