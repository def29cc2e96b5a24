"""Inversion error over DC-field directions at fixed |B|.

The default 5 degree grid covers theta in [0, 180] and phi in [0, 360);
use --step-deg 15 for a quick look.
"""

import argparse
import os
from pathlib import Path

import numpy as np

from vpdr import io as vio
from vpdr.frames import LABELS, rabi_frequencies
from vpdr.inversion import accuracy_sweep

HERE = Path(__file__).resolve().parent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", default=str(HERE.parent / "configs" / "fig5.yaml"))
    ap.add_argument("--out", default="out/fig5")
    ap.add_argument("--b-ut", type=float, default=50.0)
    ap.add_argument("--step-deg", type=float, default=5.0)
    ap.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg, _ = vio.load_config(args.config)
    thetas = np.arange(0.0, 180.0 + 1e-9, args.step_deg)
    phis = np.arange(0.0, 360.0 - 1e-9, args.step_deg)
    rabi = dict(zip(LABELS, rabi_frequencies(cfg.b_mw, cfg.gamma)))
    points = accuracy_sweep(cfg, [(t, p) for t in thetas for p in phis], args.b_ut * 1e-6, threads=args.threads, known_rabi=rabi)
    vio.write_sweep_csv(out / "sweep_accuracy.csv", points)
    for lbl in LABELS:
        db = np.array([p.report.by_label()[lbl].delta_b for p in points if p.report]) * 1e9
        ok = np.isfinite(db)
        frac = np.mean(np.abs(db[ok]) < 1.0)
        print(f"{lbl:>5}: median |dB| = {np.median(np.abs(db[ok])):.3f} nT, |dB| < 1 nT at {100 * frac:.1f}% of points")


if __name__ == "__main__":
    main()
