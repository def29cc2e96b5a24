"""From a phase-summed VPDR grid to per-orientation DQ transition frequencies.

Pipeline per orientation: pick its Rabi frequency (known or estimated from
the Rabi spectrum), take the windowed inner product at that frequency to get
a Ramsey trace, fit three decaying sinusoids whose frequencies are tied
together by the hyperfine splitting, and compare the highest line with the
exact eigenvalue difference.

Internally the fit works in microseconds and rad/us so the normal equations
stay well conditioned; everything crossing the module boundary is SI.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.signal import find_peaks

from .analytic import M_I_VALUES, dead_zone_larmor
from .constants import GAMMA, HYPERFINE_A, TWO_PI, rad_to_mhz, transition_error_to_field
from .frames import LABELS, mw_direction_from_angles, orientation, rabi_frequencies
from .lindblad import exact_highest_line, simulate_grid
from .lsq import levenberg_marquardt
from .spectral import WindowKind, f_trace, rabi_spectrum, trace_spectrum

US = 1e-6
FIT_MODES = ("triplet", "single", "free")


class RabiOrderingError(ValueError):
    """Rabi features cannot be assigned to orientations by their order."""


class DynamicRangeError(ValueError):
    """DQ lines would alias on the free-evolution grid."""


# --------------------------------------------------------------------------
# Ramsey model


@dataclass(frozen=True)
class RamseyFitModel:
    """offset + sum_m amp_m exp(-2 tau/decay) cos(omega_m tau + phase_m).

    ``mode='triplet'``: omega_m = 2|omega0 + m A| for m in (-1, 0, 1).
    ``mode='single'``: one line at 2|omega0|.
    ``mode='free'``: ``line_frequencies`` holds three independent values and
    omega0 is derived from the highest one.
    """

    omega0: float
    decay_time: float
    amplitudes: tuple
    phases: tuple
    offset: float = 0.0
    hyperfine_a: float = HYPERFINE_A
    mode: str = "triplet"
    line_frequencies: tuple = ()

    def __post_init__(self):
        if self.mode not in FIT_MODES:
            raise ValueError(f"mode must be one of {FIT_MODES}")
        if not self.decay_time > 0:
            raise ValueError("decay_time must be positive")
        n = 1 if self.mode == "single" else 3
        if len(self.amplitudes) != n or len(self.phases) != n:
            raise ValueError(f"mode {self.mode!r} needs {n} amplitudes and phases")

    def frequencies(self):
        if self.mode == "single":
            return np.array([2 * abs(self.omega0)])
        if self.mode == "free":
            return np.abs(np.asarray(self.line_frequencies, dtype=float))
        return np.array([2 * abs(self.omega0 + m * self.hyperfine_a) for m in M_I_VALUES])

    @property
    def highest_line(self):
        return float(np.max(self.frequencies()))

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        env = np.exp(-2 * tau / self.decay_time)
        out = np.full(tau.shape, self.offset, dtype=float)
        for w, a, p in zip(self.frequencies(), self.amplitudes, self.phases):
            out = out + a * env * np.cos(w * tau + p)
        return out


@dataclass
class RamseyFit:
    model: RamseyFitModel
    covariance: np.ndarray  # internal units (us, rad/us), parameter order of `param_names`
    param_names: tuple
    omega_fit: float  # highest line, rad/s
    omega_fit_stderr: float
    converged: bool
    rank_deficient: bool
    n_iter: int
    residual_rms: float
    message: str


def _line_phases(x, mode, a_us, tau_us):
    """(theta [lines x M], dtheta/dparam rows) for the frequency parameters."""
    if mode == "triplet":
        w0 = x[0]
        sgn = np.array([np.sign(w0 + m * a_us) or 1.0 for m in M_I_VALUES])
        freqs = 2 * np.abs(w0 + np.array(M_I_VALUES) * a_us)
        dfreq = [2 * sgn]  # one frequency parameter
    elif mode == "single":
        freqs = np.array([2 * abs(x[0])])
        dfreq = [np.array([2 * (np.sign(x[0]) or 1.0)])]
    else:
        freqs = np.asarray(x[:3])
        dfreq = [np.eye(3)[i] for i in range(3)]
    return freqs, dfreq


def _n_freq_params(mode):
    return 3 if mode == "free" else 1


def _unpack(x, mode):
    nf = _n_freq_params(mode)
    k, offset = x[nf], x[nf + 1]
    cs = x[nf + 2 :].reshape(-1, 2)
    return nf, k, offset, cs


def _model_and_jac(x, mode, a_us, tau_us):
    nf, k, offset, cs = _unpack(x, mode)
    freqs, dfreq = _line_phases(x, mode, a_us, tau_us)
    env = np.exp(-k * tau_us)
    theta = np.outer(freqs, tau_us)
    cos, sin = np.cos(theta), np.sin(theta)
    lines = env * (cs[:, :1] * cos - cs[:, 1:] * sin)
    y = offset + lines.sum(axis=0)
    J = np.empty((tau_us.size, x.size))
    dtheta = env * (-cs[:, :1] * sin - cs[:, 1:] * cos) * tau_us  # d line / d freq
    for i in range(nf):
        J[:, i] = dfreq[i] @ dtheta
    J[:, nf] = -(tau_us * lines.sum(axis=0))
    J[:, nf + 1] = 1.0
    J[:, nf + 2 :: 2] = (env * cos).T
    J[:, nf + 3 :: 2] = (-env * sin).T
    return y, J


def _linear_part(freqs, k, tau_us, y):
    """Best offset and (c, s) pairs for fixed nonlinear parameters."""
    env = np.exp(-k * tau_us)
    cols = [np.ones_like(tau_us)]
    for w in freqs:
        cols += [env * np.cos(w * tau_us), -env * np.sin(w * tau_us)]
    B = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(B, y, rcond=None)
    r = y - B @ coef
    return coef, float(r @ r)


def seed_omega0(trace, tau_axis, decay_time, hyperfine_a=HYPERFINE_A, mode="triplet", oversample=4):
    """Grid search for omega0 (rad/s) by variable projection.

    For each candidate omega0 the linear parameters are solved exactly at a
    fixed decay; the candidate with the smallest residual wins.  The grid
    spacing is a fraction of the spectral resolution 2 pi / span, so the
    winner sits inside the basin of the global minimum.
    """
    tau_us = (np.asarray(tau_axis) - tau_axis[0]) / US
    y = np.asarray(trace, dtype=float)
    span = max(tau_us[-1], tau_us[1] if tau_us.size > 1 else 1.0)
    nyq = np.pi / (tau_us[1] - tau_us[0])
    k = 2.0 / (decay_time / US)
    a_us = hyperfine_a * US
    step = np.pi / (oversample * span) / 2  # half, since lines sit at 2*omega0
    top = nyq / 2 if mode == "single" else max(nyq / 2 - a_us, step)
    cands = np.arange(0.0, top + step, step)
    best, best_cost = cands[0], np.inf
    for w0 in cands:
        freqs, _ = _line_phases(np.array([w0]), mode, a_us, tau_us)
        _, cost = _linear_part(freqs, k, tau_us, y)
        if cost < best_cost:
            best, best_cost = w0, cost
    return best / US


def _basis(z, mode, a_us, tau_us):
    """Design matrix for the linear parameters and its derivatives with
    respect to the nonlinear ones (frequency parameters, then decay rate)."""
    nf = _n_freq_params(mode)
    k = z[nf]
    freqs, dfreq = _line_phases(z, mode, a_us, tau_us)
    env = np.exp(-k * tau_us)
    theta = np.outer(freqs, tau_us)
    ec, es = env * np.cos(theta), env * np.sin(theta)
    n_lines = freqs.size
    B = np.empty((tau_us.size, 1 + 2 * n_lines))
    B[:, 0] = 1.0
    B[:, 1::2] = ec.T
    B[:, 2::2] = -es.T
    derivs = []
    for i in range(nf):
        d = np.zeros_like(B)
        d[:, 1::2] = (-es * tau_us * dfreq[i][:, None]).T
        d[:, 2::2] = (-ec * tau_us * dfreq[i][:, None]).T
        derivs.append(d)
    d = -tau_us[:, None] * B
    d[:, 0] = 0.0
    derivs.append(d)
    return B, derivs


def _solve_linear(B, y):
    return np.linalg.lstsq(B, y, rcond=1e-12)[0]


def fit_ramsey(trace, tau_axis, hyperfine_a=HYPERFINE_A, initial=None, mode="triplet", t2_star=2e-6):
    """Fit the Ramsey model to a trace sampled on ``tau_axis`` (seconds).

    Only the frequency parameter(s) and the decay rate are iterated; offset
    and per-line (cos, sin) amplitudes are eliminated by linear least
    squares at every step (variable projection, Kaufman Jacobian).  This
    stays well posed when two hyperfine lines nearly coincide.  Without
    ``initial`` the seed is omega0 from :func:`seed_omega0` and decay T2*/2.
    """
    if mode not in FIT_MODES:
        raise ValueError(f"mode must be one of {FIT_MODES}")
    tau_axis = np.asarray(tau_axis, dtype=float)
    y = np.asarray(trace, dtype=float)
    n_lines = 1 if mode == "single" else 3
    nf = _n_freq_params(mode)
    n_par = nf + 2 + 2 * n_lines
    if y.size < 2 * n_par:
        raise ValueError(f"trace has {y.size} points; need at least {2 * n_par} for {n_par} parameters")
    if not np.all(np.isfinite(y)):
        raise ValueError("trace contains non-finite values")
    t0 = tau_axis[0]
    tau_us = (tau_axis - t0) / US  # the envelope is referenced to the first sample; folded back below
    a_us = hyperfine_a * US
    decay_seed = (t2_star if np.isfinite(t2_star) else 10 * (tau_axis[-1] - t0 + 1e-9)) / 2

    if initial is None:
        w0 = seed_omega0(y, tau_axis, decay_seed, hyperfine_a, "single" if mode == "single" else "triplet")
        freq_x = [w0 * US]
        if mode == "free":
            freq_x = list(2 * np.abs(w0 * US + np.array(M_I_VALUES) * a_us))
        k = 2.0 / (decay_seed / US)
    else:
        if initial.mode != mode:
            raise ValueError("initial model mode does not match the requested mode")
        freq_x = list(np.asarray(initial.line_frequencies) * US) if mode == "free" else [initial.omega0 * US]
        k = 2.0 / (initial.decay_time / US)
    z0 = np.array(freq_x + [k], dtype=float)
    scale = max(np.max(np.abs(y - y.mean())), 1e-300)
    ys = y / scale

    def resid(z):
        B, _ = _basis(z, mode, a_us, tau_us)
        return ys - B @ _solve_linear(B, ys)

    def jac(z):
        B, derivs = _basis(z, mode, a_us, tau_us)
        c = _solve_linear(B, ys)
        J = np.empty((ys.size, z.size))
        for i, d in enumerate(derivs):
            v = d @ c
            J[:, i] = -(v - B @ _solve_linear(B, v))
        return J

    res = levenberg_marquardt(resid, z0, jac=jac)
    z = res.x
    B, _ = _basis(z, mode, a_us, tau_us)
    coef = _solve_linear(B, y)
    x = np.concatenate([z, coef])
    _, k, offset, cs = _unpack(x, mode)

    # covariance over all parameters from the full Jacobian at the solution
    fitted, J_full = _model_and_jac(x, mode, a_us, tau_us)
    r = y - fitted
    dof = max(y.size - x.size, 1)
    cov = np.linalg.pinv(J_full.T @ J_full) * float(r @ r) / dof
    sv = np.linalg.svd(J_full, compute_uv=False)
    rank_def = bool(sv[-1] <= sv[0] * 1e-12) or k <= 0

    amps = np.hypot(cs[:, 0], cs[:, 1]) * np.exp(k * t0 / US)
    freqs_us, _ = _line_phases(x, mode, a_us, tau_us)
    # shift the phase reference from tau = t0 back to tau = 0
    phases = np.arctan2(cs[:, 1], cs[:, 0]) - freqs_us * t0 / US
    decay = 2.0 / (k / US) if k > 0 else np.inf
    model = RamseyFitModel(
        omega0=float(abs(x[0]) / US) if mode != "free" else float((np.max(np.abs(x[:3])) / 2 - a_us) / US),
        decay_time=float(decay) if np.isfinite(decay) else 1e300,
        amplitudes=tuple(float(a) for a in amps),
        phases=tuple(float(np.angle(np.exp(1j * p))) for p in phases),
        offset=float(offset),
        hyperfine_a=hyperfine_a,
        mode=mode,
        line_frequencies=tuple(float(v / US) for v in np.abs(x[:3])) if mode == "free" else (),
    )
    if mode == "free":
        i = int(np.argmax(np.abs(x[:3])))
        stderr = np.sqrt(abs(cov[i, i])) / US
    else:
        stderr = 2 * np.sqrt(abs(cov[0, 0])) / US
    names = (("w1", "w2", "w3") if mode == "free" else ("omega0",)) + ("rate", "offset")
    names += tuple(f"{p}{i}" for i in range(n_lines) for p in ("c", "s"))
    rms = float(np.sqrt(np.mean(r**2)))
    return RamseyFit(model, cov, names, model.highest_line, float(stderr), res.converged, rank_def, res.n_iter, rms, res.message)


# --------------------------------------------------------------------------
# Rabi estimation


@dataclass
class RabiEstimate:
    omega: dict  # label -> rad/s (nan when unassigned)
    ok: dict  # label -> bool
    peaks: np.ndarray  # all refined peak positions used, rad/s ascending
    message: str = ""

    @property
    def complete(self):
        return all(self.ok.values())


def _refine_peak(x, y, i):
    if i == 0 or i == len(y) - 1:
        return x[i]
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    denom = y0 - 2 * y1 + y2
    if denom == 0:
        return x[i]
    shift = 0.5 * (y0 - y2) / denom
    return x[i] + shift * (x[i + 1] - x[i])


def estimate_rabi(spectrum, nu_axis, expected_order, threshold=0.25):
    """Assign Rabi-spectrum peaks to orientations.

    ``expected_order`` lists labels by ascending Rabi frequency.  Candidate
    peaks must reach ``threshold`` of the spectrum maximum in both height and
    prominence (the inner product rings negative around each feature, so
    prominence alone admits ripples).  The lowest ``len(expected_order)``
    candidates are used; harmonics at 2*Omega sit above all of them as long
    as every Omega_i exceeds Omega_max/2.  Missing peaks produce a partial
    estimate with ``ok=False`` entries.
    """
    spectrum = np.asarray(spectrum, dtype=float)
    nu_axis = np.asarray(nu_axis, dtype=float)
    expected_order = tuple(expected_order)
    top = float(np.max(spectrum)) if spectrum.size else 0.0
    if top > 0:
        idx, _ = find_peaks(spectrum, height=threshold * top, prominence=threshold * top)
    else:
        idx = np.array([], dtype=int)
    peaks = np.array([_refine_peak(nu_axis, spectrum, i) for i in idx])
    want = len(expected_order)
    chosen = np.sort(peaks)[:want]
    omega, ok = {}, {}
    if chosen.size == want:
        for lbl, w in zip(expected_order, chosen):
            omega[lbl], ok[lbl] = float(w), True
        msg = ""
    else:
        for lbl in expected_order:
            omega[lbl], ok[lbl] = np.nan, False
        msg = f"found {chosen.size} Rabi peaks, expected {want}; peaks merged or outside the nu axis"
    return RabiEstimate(omega, ok, chosen, msg)


def expected_rabi_order(config, rel_tol=None):
    """Labels sorted by nominal Rabi frequency.

    Raises RabiOrderingError when two nominal values are closer than
    ``rel_tol`` of Omega_max (default: the pulse-axis resolution 2 pi/t_max),
    since their order cannot then survive any drift in MW parameters.
    """
    rabi = rabi_frequencies(config.b_mw, config.gamma)
    labels = [lbl for lbl in LABELS if lbl in config.orientations]
    vals = np.array([rabi[LABELS.index(lbl)] for lbl in labels])
    order = np.argsort(vals, kind="stable")
    if rel_tol is None:
        t_span = config.t_grid.step * config.t_grid.count
        tol = TWO_PI / t_span
    else:
        tol = rel_tol * config.omega_max
    gaps = np.diff(vals[order])
    if gaps.size and np.min(gaps) < tol:
        i = int(np.argmin(gaps))
        a, b = labels[order[i]], labels[order[i + 1]]
        raise RabiOrderingError(
            f"nominal Rabi frequencies of {a} and {b} differ by {rad_to_mhz(gaps[i]):.4g} MHz, below the "
            f"drift tolerance {rad_to_mhz(tol):.4g} MHz; their ordering is undefined"
        )
    return tuple(labels[i] for i in order)


def default_nu_axis(signal, step=TWO_PI * 0.1e6):
    """Pulse-axis frequencies from twice the Blackman main-lobe half-width
    (clear of the DC lobe) up to Nyquist."""
    dt = signal.t_axis[1] - signal.t_axis[0]
    t_span = dt * signal.t_axis.size
    start = 12 * np.pi / t_span
    return np.arange(start, np.pi / dt, step)


# --------------------------------------------------------------------------
# end-to-end inversion


@dataclass
class OrientationResult:
    label: str
    axis: tuple
    omega_rabi_est: float
    omega_fit: float
    omega_fit_stderr: float
    omega_exact: float
    delta_b: float
    status: str
    fit: RamseyFit = field(default=None, repr=False)

    def row(self):
        return {
            "label": self.label,
            "omega_rabi_mhz": float(rad_to_mhz(self.omega_rabi_est)),
            "f_fit_mhz": float(rad_to_mhz(self.omega_fit)),
            "f_exact_mhz": float(rad_to_mhz(self.omega_exact)),
            "dB_nT": float(self.delta_b * 1e9),
            "status": self.status,
        }


@dataclass
class InversionReport:
    results: list
    window: str
    rabi_source: str
    message: str = ""

    def by_label(self):
        return {r.label: r for r in self.results}

    def to_dict(self):
        out = {"window": self.window, "rabi_source": self.rabi_source, "message": self.message, "orientations": []}
        for r in self.results:
            d = r.row()
            d["axis"] = list(r.axis)
            d["f_fit_stderr_hz"] = r.omega_fit_stderr / TWO_PI
            if r.fit is not None:
                d["fit"] = {
                    "omega0_mhz": float(rad_to_mhz(r.fit.model.omega0)),
                    "decay_time_us": r.fit.model.decay_time / US,
                    "amplitudes": list(r.fit.model.amplitudes),
                    "phases": list(r.fit.model.phases),
                    "offset": r.fit.model.offset,
                    "converged": r.fit.converged,
                    "rank_deficient": r.fit.rank_deficient,
                    "iterations": r.fit.n_iter,
                    "residual_rms": r.fit.residual_rms,
                }
            out["orientations"].append(d)
        return out


def _status(fit, t2_star):
    flags = []
    if not fit.converged:
        flags.append("not_converged")
    if fit.rank_deficient:
        flags.append("rank_deficient")
    if abs(fit.model.omega0) < dead_zone_larmor(1.0, t2_star):
        flags.append("dead_zone")
    return ",".join(flags) or "ok"


def invert(
    signal,
    config=None,
    window=WindowKind.BLACKMAN,
    nu_axis=None,
    known_rabi=None,
    mode="triplet",
    sym=False,
    kernel="cos",
    expected_order=None,
    threshold=0.25,
):
    """Extract every configured orientation's highest DQ line.

    ``known_rabi`` maps label -> rad/s (or is a 4-sequence in LABELS order);
    without it the Rabi frequencies come from the signal itself.
    """
    config = config or signal.config
    if config is None:
        raise ValueError("a VpdrConfig is required (none attached to the signal)")
    if not signal.sq_cancelled:
        raise ValueError("signal must be SQ-cancelled (summed over phases 0 and pi)")
    labels = [lbl for lbl in LABELS if lbl in config.orientations]
    message = ""
    if known_rabi is not None:
        if not isinstance(known_rabi, dict):
            known_rabi = dict(zip(LABELS, known_rabi))
        rabi = {lbl: float(known_rabi[lbl]) for lbl in labels}
        ok = {lbl: True for lbl in labels}
        source = "known"
    else:
        order = expected_order or expected_rabi_order(config)
        nu_axis = default_nu_axis(signal) if nu_axis is None else np.asarray(nu_axis, dtype=float)
        est = estimate_rabi(rabi_spectrum(signal, nu_axis, window, kernel), nu_axis, order, threshold)
        rabi, ok, message = est.omega, est.ok, est.message
        source = "estimated"
    results = []
    for lbl in labels:
        exact = exact_highest_line(config, lbl)
        axis = tuple(float(v) for v in orientation(lbl).axis)
        if not ok[lbl]:
            results.append(OrientationResult(lbl, axis, np.nan, np.nan, np.nan, exact, np.nan, "rabi_missing"))
            continue
        trace = f_trace(signal, rabi[lbl], window, kernel, sym)
        if np.iscomplexobj(trace):
            trace = trace.real
        fit = fit_ramsey(trace, signal.tau_axis, config.hyperfine_a, mode=mode, t2_star=config.t2_star)
        db = transition_error_to_field(fit.omega_fit - exact) * (GAMMA / config.gamma)
        results.append(
            OrientationResult(lbl, axis, rabi[lbl], fit.omega_fit, fit.omega_fit_stderr, exact, db, _status(fit, config.t2_star), fit)
        )
    return InversionReport(results, WindowKind(window).value, source, message)


# --------------------------------------------------------------------------
# sweeps


def check_dynamic_range(config, b_magnitude=None):
    """Reject setups whose highest DQ line exceeds the tau-grid Nyquist limit.

    With ``b_magnitude`` the worst case (field along an NV axis) is checked.
    """
    nyq = np.pi / config.tau_grid.step
    if b_magnitude is None:
        proj = np.abs([np.dot(config.b_dc, orientation(lbl).axis) for lbl in config.orientations])
        b_ax = float(np.max(proj))
    else:
        b_ax = float(b_magnitude)
    top = 2 * (config.gamma * b_ax + config.hyperfine_a)
    if top > nyq:
        b_lim = (nyq / 2 - config.hyperfine_a) / config.gamma
        raise DynamicRangeError(
            f"dynamic range exceeded: highest DQ line {rad_to_mhz(top):.4g} MHz is above the free-evolution "
            f"Nyquist limit {rad_to_mhz(nyq):.4g} MHz (axial fields up to {b_lim * 1e6:.4g} uT are supported "
            f"at tau step {config.tau_grid.step * 1e9:.4g} ns)"
        )


@dataclass
class SweepPoint:
    params: dict
    report: InversionReport = None
    error: str = ""

    def row(self):
        out = dict(self.params)
        by = self.report.by_label() if self.report else {}
        for lbl in LABELS:
            r = by.get(lbl)
            d = r.row() if r else {"omega_rabi_mhz": np.nan, "f_fit_mhz": np.nan, "f_exact_mhz": np.nan, "dB_nT": np.nan, "status": "absent"}
            for key in ("omega_rabi_mhz", "f_fit_mhz", "f_exact_mhz", "dB_nT", "status"):
                out[f"{key}[{lbl}]"] = d[key]
        out["status"] = "error: " + self.error if self.error else "ok"
        return out


def _run_point(params, cfg, invert_kw, threads):
    try:
        sig = simulate_grid(cfg, threads=1)
        return SweepPoint(params, invert(sig, cfg, **invert_kw))
    except (ValueError, ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
        return SweepPoint(params, None, f"{type(exc).__name__}: {exc}")


def _map_points(jobs, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(lambda j: _run_point(*j), jobs))
    return [_run_point(*j) for j in jobs]


def accuracy_sweep(base_config, directions_deg, b_magnitude, threads=1, **invert_kw):
    """Invert at |B| = ``b_magnitude`` for each (theta, phi) field direction.

    Failures at single points are recorded and the sweep continues.
    """
    check_dynamic_range(base_config, b_magnitude)
    jobs = []
    for theta, phi in directions_deg:
        b = b_magnitude * mw_direction_from_angles(theta, phi)
        jobs.append(({"theta_deg": float(theta), "phi_deg": float(phi)}, base_config.with_(b_dc=tuple(b)), invert_kw, threads))
    return _map_points(jobs, threads)


def robustness_sweep(base_config, omega_max_values=None, mw_angles_deg=None, threads=1, **invert_kw):
    """Self-calibrated inversions under drifted MW amplitude or direction.

    The expected Rabi ordering is taken from the undrifted base config, the
    only prior knowledge the self-calibrated path assumes.
    """
    if (omega_max_values is None) == (mw_angles_deg is None):
        raise ValueError("give exactly one of omega_max_values or mw_angles_deg")
    check_dynamic_range(base_config)
    invert_kw = dict(invert_kw)
    invert_kw.setdefault("expected_order", expected_rabi_order(base_config))
    invert_kw.pop("known_rabi", None)
    jobs = []
    if omega_max_values is not None:
        for om in omega_max_values:
            jobs.append(({"omega_max_mhz": float(rad_to_mhz(om))}, base_config.with_(omega_max=float(om)), invert_kw, threads))
    else:
        for theta, phi in mw_angles_deg:
            d = tuple(mw_direction_from_angles(theta, phi))
            jobs.append(({"theta_mw_deg": float(theta), "phi_mw_deg": float(phi)}, base_config.with_(mw_direction=d), invert_kw, threads))
    return _map_points(jobs, threads)


# --------------------------------------------------------------------------
# comparison path: Lorentzian fit to the trace's magnitude spectrum


@dataclass
class LorentzianFit:
    center: float  # rad/s
    width: float
    height: float
    baseline: float
    converged: bool


def lorentzian_line(trace, tau_axis, omega_guess, half_span=None, points=801):
    """Fit a Lorentzian to |spectrum| around ``omega_guess``.

    Kept for comparison with the time-domain fit; it is biased by the
    overlapping hyperfine lines and window-free truncation.
    """
    tau_axis = np.asarray(tau_axis, dtype=float)
    span = tau_axis[-1] - tau_axis[0]
    half_span = half_span or HYPERFINE_A
    omega = np.linspace(omega_guess - half_span, omega_guess + half_span, points)
    mag = trace_spectrum(trace, tau_axis, omega)
    scale_w = TWO_PI / span

    def resid(x):
        c, g, h, b = x
        return (h / (1 + ((omega - omega_guess) / scale_w - c) ** 2 / g**2) + b - mag) / max(mag.max(), 1e-300)

    i = int(np.argmax(mag))
    x0 = [(omega[i] - omega_guess) / scale_w, 0.5, mag[i], float(np.min(mag))]
    res = levenberg_marquardt(resid, x0)
    c, g, h, b = res.x
    return LorentzianFit(omega_guess + c * scale_w, abs(g) * scale_w, h, b, res.converged)


def report_as_dict(obj):
    """JSON-ready plain dict for reports and sweep points."""
    if isinstance(obj, InversionReport):
        return obj.to_dict()
    if isinstance(obj, SweepPoint):
        return {"params": obj.params, "error": obj.error, "report": obj.report.to_dict() if obj.report else None}
    return asdict(obj)
