"""Command-line front end.

Every command writes its outputs plus a ``manifest.json`` (command line,
config snapshot, seed, code version, wall time, output checksums) into the
``--out`` directory.  Exit codes: 0 success, 2 invalid input, 3 numerical
failure.
"""

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import io as vio
from .constants import mhz_to_rad, rad_to_mhz
from .field_recon import HarmonicAssignmentError, fit_linear_field, read_peaks_csv, write_fit_json, write_residuals_csv
from .frames import LABELS, angles_from_direction, rabi_frequencies
from .inversion import FIT_MODES, RabiOrderingError, accuracy_sweep, default_nu_axis, invert, robustness_sweep
from .lindblad import EigenbasisError, simulate_grid
from .mw_optimizer import WEDGE, optimize_direction, write_map_csv
from .sensitivity import axial_larmor, fit_cost_ratio, monte_carlo_ratio, ratio_hard_pulse, tau_opt
from .spectral import WindowKind, spectral_map

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


class UsageError(ValueError):
    pass


def _axis_mhz(spec, name):
    """'start:stop:step' in MHz -> rad/s axis (stop inclusive within step/2)."""
    try:
        start, stop, step = (float(x) for x in spec.split(":"))
    except ValueError:
        raise UsageError(f"{name} must look like START:STOP:STEP (MHz), got {spec!r}") from None
    if step <= 0 or stop < start:
        raise UsageError(f"{name}: need STEP > 0 and STOP >= START")
    axis = np.arange(start, stop + step / 2, step)
    if axis.size == 0:
        raise UsageError(f"{name}: empty axis")
    return mhz_to_rad(axis)


def _range_deg(spec, name):
    try:
        start, stop, step = (float(x) for x in spec.split(":"))
    except ValueError:
        raise UsageError(f"{name} must look like START:STOP:STEP (degrees), got {spec!r}") from None
    if step <= 0 or stop < start:
        raise UsageError(f"{name}: need STEP > 0 and STOP >= START")
    return np.arange(start, stop + step / 2, step)


class Run:
    """Collects outputs and writes the manifest."""

    def __init__(self, args, config=None):
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.manifest = vio.RunManifest(
            command=args.command,
            config=vio.config_to_dict(config) if config is not None else {},
            seed=getattr(args, "seed", None),
            code_version=__version__,
            argv=list(args.argv),
        )
        self.t0 = time.perf_counter()

    def path(self, name):
        return self.out / name

    def record(self, name):
        self.manifest.add_output(self.path(name), name)

    def finish(self):
        self.manifest.wall_time_s = time.perf_counter() - self.t0
        self.manifest.write(self.path("manifest.json"))


# --------------------------------------------------------------------------
# commands


def cmd_simulate(args):
    cfg, _ = vio.load_config(args.config)
    run = Run(args, cfg)
    grid = simulate_grid(cfg, threads=args.threads)
    vio.save_signal(run.path("signal.npz"), grid)
    run.record("signal.npz")
    if args.csv:
        vio.write_signal_csv(run.path("signal.csv"), grid)
        run.record("signal.csv")
    run.finish()
    print(f"simulated {grid.values.shape[0]}x{grid.values.shape[1]} grid -> {run.path('signal.npz')}")


def cmd_spectrum(args):
    grid = vio.load_signal(args.grid)
    run = Run(args, grid.config)
    nu = _axis_mhz(args.nu_mhz, "--nu-mhz") if args.nu_mhz else default_nu_axis(grid, step=mhz_to_rad(0.25))
    if args.omega_mhz:
        omega = _axis_mhz(args.omega_mhz, "--omega-mhz")
    else:
        nyq = rad_to_mhz(np.pi / (grid.tau_axis[1] - grid.tau_axis[0]))
        omega = mhz_to_rad(np.arange(0.0, nyq, 0.1))
    smap = spectral_map(grid, nu, omega, args.window, args.kernel)
    vio.save_spectral_map(run.path("spectrum.npz"), smap)
    vio.write_spectral_csv(run.path("spectrum.csv"), smap)
    run.record("spectrum.npz")
    run.record("spectrum.csv")
    run.finish()
    print(f"spectral map {smap.values.shape} -> {run.path('spectrum.csv')}")


def _known_rabi(cfg):
    return dict(zip(LABELS, rabi_frequencies(cfg.b_mw, cfg.gamma)))


def cmd_invert(args):
    grid = vio.load_signal(args.grid)
    if grid.config is None:
        raise UsageError("grid file carries no config; inversion needs the exact reference")
    cfg = grid.config
    run = Run(args, cfg)
    known = _known_rabi(cfg) if args.rabi == "known" else None
    report = invert(grid, cfg, window=args.window, known_rabi=known, mode=args.mode, sym=args.sym, kernel=args.kernel)
    vio.write_json(run.path("report.json"), report.to_dict())
    vio.write_rows_csv(run.path("report.csv"), [r.row() for r in report.results])
    run.record("report.json")
    run.record("report.csv")
    run.finish()
    for r in report.results:
        row = r.row()
        print(f"{r.label:>5}  f_fit={row['f_fit_mhz']:.6f} MHz  dB={row['dB_nT']:+.3f} nT  {row['status']}")


def _sweep_options(args, extras, keys):
    opts = dict(extras.get("sweep", {}) or {})
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            opts[k] = v
    return opts


def cmd_sweep_accuracy(args):
    cfg, extras = vio.load_config(args.config)
    opts = _sweep_options(args, extras, ("b_ut", "theta_deg", "phi_deg"))
    b_ut = float(opts.get("b_ut", 50.0))
    thetas = _range_deg(str(opts.get("theta_deg", "0:180:5")), "theta_deg")
    phis = _range_deg(str(opts.get("phi_deg", "0:355:5")), "phi_deg")
    run = Run(args, cfg)
    dirs = [(t, p) for t in thetas for p in phis]
    known = _known_rabi(cfg) if args.rabi == "known" else None
    points = accuracy_sweep(cfg, dirs, b_ut * 1e-6, threads=args.threads, window=args.window, kernel=args.kernel, known_rabi=known)
    vio.write_sweep_csv(run.path("sweep_accuracy.csv"), points)
    run.record("sweep_accuracy.csv")
    run.finish()
    _summarize(points)


def cmd_sweep_robustness(args):
    cfg, extras = vio.load_config(args.config)
    opts = _sweep_options(args, extras, ("omega_max_mhz", "mw_theta_deg", "mw_phi_deg"))
    run = Run(args, cfg)
    kw = {"threads": args.threads, "window": args.window, "kernel": args.kernel}
    if opts.get("omega_max_mhz") is not None:
        om = mhz_to_rad(_range_deg(str(opts["omega_max_mhz"]), "omega_max_mhz"))
        points = robustness_sweep(cfg, omega_max_values=om, **kw)
    elif opts.get("mw_theta_deg") is not None or opts.get("mw_phi_deg") is not None:
        th0, ph0 = angles_from_direction(cfg.mw_direction)
        ths = _range_deg(str(opts.get("mw_theta_deg") or f"{th0}:{th0}:1"), "mw_theta_deg")
        phs = _range_deg(str(opts.get("mw_phi_deg") or f"{ph0}:{ph0}:1"), "mw_phi_deg")
        points = robustness_sweep(cfg, mw_angles_deg=[(t, p) for t in ths for p in phs], **kw)
    else:
        raise UsageError("give --omega-max-mhz or --mw-theta-deg/--mw-phi-deg ranges")
    vio.write_sweep_csv(run.path("sweep_robustness.csv"), points)
    run.record("sweep_robustness.csv")
    run.finish()
    _summarize(points)


def _summarize(points):
    worst = [abs(r.delta_b) for p in points if p.report for r in p.report.results if np.isfinite(r.delta_b)]
    errors = sum(1 for p in points if p.error)
    if worst:
        print(f"{len(points)} points, {errors} errors, max |dB| = {max(worst) * 1e9:.3f} nT")
    else:
        print(f"{len(points)} points, {errors} errors")


def cmd_optimize_mw(args):
    run = Run(args)
    theta_range = (args.theta_min, args.theta_max)
    phi_range = (args.phi_min, args.phi_max)
    ranked = optimize_direction(theta_range, phi_range, args.step_deg, args.min_rabi_frac, top=args.top)
    rows = [
        {
            "rank": k + 1,
            "theta_deg": r.theta_deg,
            "phi_deg": r.phi_deg,
            "min_separation_pct": 100 * r.min_separation_frac,
            "limiting_pair": f"{LABELS[r.limiting_pair[0]]}-{r.limiting_pair[2]:g}x{LABELS[r.limiting_pair[1]]}",
            "min_rabi_frac": min(r.rabi_fracs),
        }
        for k, r in enumerate(ranked)
    ]
    vio.write_rows_csv(run.path("optima.csv"), rows)
    run.record("optima.csv")
    step = args.map_step_deg
    write_map_csv(run.path("separation_map.csv"), np.arange(theta_range[0], theta_range[1] + step / 2, step), np.arange(phi_range[0], phi_range[1] + step / 2, step))
    run.record("separation_map.csv")
    run.finish()
    best = ranked[0]
    print(f"best: theta={best.theta_deg:.3f} deg phi={best.phi_deg:.3f} deg separation={100 * best.min_separation_frac:.2f}%")


def cmd_sensitivity(args):
    if args.seed is None:
        raise UsageError("sensitivity runs need an explicit --seed")
    cfg, _ = vio.load_config(args.config)
    label = args.orientation or cfg.orientations[0]
    if label not in LABELS:
        raise UsageError(f"--orientation must be one of {list(LABELS)}")
    cfg = cfg.with_(orientations=(label,))
    run = Run(args, cfg)
    rows = []
    for hf in (False, True):
        t_opt = tau_opt(axial_larmor(cfg), cfg.t2_star, hf, cfg.hyperfine_a)
        for max_t_ns in args.max_t_ns:
            r = monte_carlo_ratio(cfg, t_opt, args.sigma, args.trials, max_t_ns * 1e-9, args.window, hf, args.seed)
            rows.append(
                {
                    "max_t_ns": float(max_t_ns),
                    "window": r.window,
                    "hyperfine": hf,
                    "tau_opt_ns": t_opt * 1e9,
                    "ratio": r.ratio,
                    "ci_low": r.ci_low,
                    "ci_high": r.ci_high,
                    "propagated": r.propagated,
                    "hard_pulse_ratio": ratio_hard_pulse(args.window),
                    "trials": r.trials,
                    "seed": args.seed,
                }
            )
    vio.write_rows_csv(run.path("sensitivity.csv"), rows)
    run.record("sensitivity.csv")
    if args.tau_max_us:
        fit_rows = []
        for hf in (False, True):
            for res in fit_cost_ratio(cfg, np.array(args.tau_max_us) * 1e-6, args.sigma, args.trials, hf, args.seed):
                fit_rows.append(
                    {
                        "tau_max_ns": res.tau_max * 1e9,
                        "hyperfine": hf,
                        "ratio": res.ratio,
                        "ci_low": res.ci_low,
                        "ci_high": res.ci_high,
                        "trials": res.trials_used,
                        "failures": res.failures,
                        "seed": args.seed,
                    }
                )
        vio.write_rows_csv(run.path("fit_cost.csv"), fit_rows)
        run.record("fit_cost.csv")
    run.finish()
    for r in rows:
        print(f"max_t={r['max_t_ns']:g} ns hyperfine={r['hyperfine']}: ratio {r['ratio']:.4f} [{r['ci_low']:.4f}, {r['ci_high']:.4f}]")


def cmd_reconstruct(args):
    obs = read_peaks_csv(args.peaks)
    run = Run(args)
    fit = fit_linear_field(obs)
    write_fit_json(run.path("field_fit.json"), fit)
    write_residuals_csv(run.path("residuals.csv"), obs, fit)
    run.record("field_fit.json")
    run.record("residuals.csv")
    run.finish()
    b = np.array(fit.model.offset) * 1e6
    s = np.array(fit.model.slope) * 1e6
    print(f"b = {np.round(b, 4)} uT, s = {np.round(s, 4)} uT/V, chi2 = {fit.chi2 / 1e-12:.3g} uT^2 (sign not determined)")


# --------------------------------------------------------------------------
# parser


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    common.add_argument("--seed", type=int, default=None)

    spec = argparse.ArgumentParser(add_help=False)
    spec.add_argument("--window", choices=[w.value for w in WindowKind], default="blackman")
    spec.add_argument("--kernel", choices=["cos", "exp"], default="cos")

    p = argparse.ArgumentParser(prog="vpdr", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="simulate an SQ-cancelled signal grid")
    s.add_argument("--config", required=True)
    s.add_argument("--csv", action="store_true", help="also write signal.csv")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("spectrum", parents=[common, spec], help="2-D inner-product map of a grid")
    s.add_argument("--grid", required=True)
    s.add_argument("--nu-mhz", help="pulse-axis frequencies START:STOP:STEP")
    s.add_argument("--omega-mhz", help="free-evolution frequencies START:STOP:STEP")
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("invert", parents=[common, spec], help="per-orientation transition frequencies")
    s.add_argument("--grid", required=True)
    s.add_argument("--rabi", choices=["known", "estimate"], default="known")
    s.add_argument("--mode", choices=FIT_MODES, default="triplet")
    s.add_argument("--sym", action="store_true", help="symmetric (N-1) window variant")
    s.set_defaults(func=cmd_invert)

    s = sub.add_parser("sweep-accuracy", parents=[common, spec], help="inversion error over field directions")
    s.add_argument("--config", required=True)
    s.add_argument("--b-ut", dest="b_ut", type=float)
    s.add_argument("--theta-deg", help="START:STOP:STEP")
    s.add_argument("--phi-deg", help="START:STOP:STEP")
    s.add_argument("--rabi", choices=["known", "estimate"], default="known")
    s.set_defaults(func=cmd_sweep_accuracy)

    s = sub.add_parser("sweep-robustness", parents=[common, spec], help="self-calibrated inversion under MW drift")
    s.add_argument("--config", required=True)
    s.add_argument("--omega-max-mhz", help="START:STOP:STEP")
    s.add_argument("--mw-theta-deg", help="START:STOP:STEP")
    s.add_argument("--mw-phi-deg", help="START:STOP:STEP")
    s.set_defaults(func=cmd_sweep_robustness)

    s = sub.add_parser("optimize-mw", parents=[common], help="MW direction maximizing Rabi separation")
    s.add_argument("--theta-min", type=float, default=WEDGE[0][0])
    s.add_argument("--theta-max", type=float, default=WEDGE[0][1])
    s.add_argument("--phi-min", type=float, default=WEDGE[1][0])
    s.add_argument("--phi-max", type=float, default=WEDGE[1][1])
    s.add_argument("--step-deg", type=float, default=0.25)
    s.add_argument("--map-step-deg", type=float, default=0.5)
    s.add_argument("--min-rabi-frac", type=float, default=None)
    s.add_argument("--top", type=int, default=10)
    s.set_defaults(func=cmd_optimize_mw)

    s = sub.add_parser("sensitivity", parents=[common], help="Monte Carlo sensitivity ratios")
    s.add_argument("--config", required=True)
    s.add_argument("--orientation", default=None)
    s.add_argument("--window", choices=[w.value for w in WindowKind], default="boxcar")
    s.add_argument("--sigma", type=float, default=1e-4)
    s.add_argument("--trials", type=int, default=200)
    s.add_argument("--max-t-ns", type=float, nargs="+", default=[50.0, 100.0, 200.0, 400.0, 800.0])
    s.add_argument("--tau-max-us", type=float, nargs="*", default=[])
    s.set_defaults(func=cmd_sensitivity)

    s = sub.add_parser("reconstruct", parents=[common], help="linear-in-voltage field from peak CSV")
    s.add_argument("--peaks", required=True)
    s.set_defaults(func=cmd_reconstruct)
    return p


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv = argv
    if getattr(args, "threads", 1) < 1:
        parser.error("--threads must be >= 1")
    try:
        args.func(args)
    except (EigenbasisError, RabiOrderingError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"vpdr {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (HarmonicAssignmentError, ValueError, OSError) as exc:
        print(f"vpdr {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except RuntimeError as exc:
        print(f"vpdr {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
