"""Sensitivity cost of VPDR relative to single-tau DQ Ramsey.

Analytic window factors, the finite Omega/omega_L correction, Monte Carlo
estimates with additive Gaussian readout noise, the extra cost of fitting
many free-evolution times, and the small-field dead zone.

Every Monte Carlo trial draws from its own generator seeded by
(seed, trial index), so results do not depend on evaluation order.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate, stats
from scipy.optimize import minimize_scalar

from .analytic import dead_zone_larmor
from .constants import GAMMA, HYPERFINE_A
from .frames import LABELS, rabi_frequencies
from .inversion import fit_ramsey
from .lindblad import Grid, exact_transitions, simulate_grid
from .spectral import WindowKind, f_traces, inner_product_weights, window_shape

ONE_NT = 1e-9


@dataclass(frozen=True)
class SensitivityRatio:
    ratio: float
    method: str  # hard_pulse_analytic | finite_alpha_analytic | monte_carlo
    window: str
    trials: int = 0
    sigma: float = 0.0
    seed: int = None
    ci_low: float = np.nan
    ci_high: float = np.nan
    propagated: float = np.nan  # same ratio with the exact linear noise propagation

    def __post_init__(self):
        if not (self.ratio > 0):
            raise ValueError("ratio must be positive")


# --------------------------------------------------------------------------
# analytic


def window_means(window):
    """(mean W, mean W^2) of the continuous window profile on [0, 1]."""
    w = window_shape(window)
    m1 = integrate.quad(lambda x: float(w(x)), 0, 1, limit=200)[0]
    m2 = integrate.quad(lambda x: float(w(x)) ** 2, 0, 1, limit=200)[0]
    return m1, m2


def ratio_hard_pulse(window=WindowKind.BOXCAR):
    m1, m2 = window_means(window)
    return 2 * np.sqrt(2) * np.sqrt(m2) / m1


def finite_alpha_factor(alpha):
    a2 = alpha * alpha
    denom = abs(a2 * a2 * (a2 * a2 - 16 * a2 - 192))
    if denom < 1e-9:
        raise ZeroDivisionError(f"finite-alpha sensitivity factor is singular at alpha = {alpha!r}")
    return (a2 + 4) ** 4 / denom


def ratio_finite_alpha(alpha, window=WindowKind.BOXCAR):
    return ratio_hard_pulse(window) * finite_alpha_factor(alpha)


# --------------------------------------------------------------------------
# slope, dead zone, optimal tau


def slope_function(tau, omega_l, t2_star):
    """s(tau) = exp(-2 tau/T2*) tau sin(2 omega_L tau)."""
    tau = np.asarray(tau, dtype=float)
    return np.exp(-2 * tau / t2_star) * tau * np.sin(2 * omega_l * tau)


def slope_small_field_max(omega_l, t2_star):
    """Small-omega_L limit of max |s|: 2 T2*^2 omega_L / e^2 (at tau = T2*)."""
    return 2 * t2_star**2 * abs(omega_l) / np.e**2


def slope_argmax(omega_l, t2_star, tau_max=None, points=20001):
    """(tau, |s|) maximizing |s| on (0, tau_max], default tau_max = 3 T2*."""
    tau_max = tau_max or 3 * t2_star
    tau = np.linspace(0, tau_max, points)[1:]
    s = np.abs(slope_function(tau, omega_l, t2_star))
    i = int(np.argmax(s))
    return float(tau[i]), float(s[i])


@dataclass(frozen=True)
class DeadZoneBound:
    omega_l_min: float  # rad/s
    b_axial_min: float  # tesla


def dead_zone_bound(epsilon, t2_star, gamma=GAMMA):
    w = dead_zone_larmor(epsilon, t2_star)
    return DeadZoneBound(w, w / gamma)


def dead_zone_half_angle(epsilon, t2_star, b_magnitude, gamma=GAMMA):
    """Half-width (degrees) of the band about the plane perpendicular to an
    axis where the axial field falls below the dead-zone bound."""
    b_min = dead_zone_bound(epsilon, t2_star, gamma).b_axial_min
    return float(np.degrees(np.arcsin(min(b_min / b_magnitude, 1.0))))


def hard_pulse_slope(tau, omega_l, t2_star, hyperfine=False, hyperfine_a=HYPERFINE_A):
    """d/d omega_L of the hard-pulse DQ Ramsey signal, up to a constant."""
    shifts = (-1, 0, 1) if hyperfine else (0,)
    return np.mean([slope_function(tau, omega_l + m * hyperfine_a, t2_star) for m in shifts], axis=0)


def tau_opt(omega_l, t2_star, hyperfine=False, hyperfine_a=HYPERFINE_A, tau_max=None):
    """Free-evolution time maximizing the hard-pulse DQ slope magnitude."""
    tau_max = tau_max or 3 * t2_star
    tau = np.linspace(0, tau_max, 30001)[1:]
    s = np.abs(hard_pulse_slope(tau, omega_l, t2_star, hyperfine, hyperfine_a))
    i = int(np.argmax(s))
    lo, hi = tau[max(i - 1, 0)], tau[min(i + 1, tau.size - 1)]
    res = minimize_scalar(
        lambda x: -abs(hard_pulse_slope(x, omega_l, t2_star, hyperfine, hyperfine_a)),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-13},
    )
    return float(res.x)


# --------------------------------------------------------------------------
# Monte Carlo


def _rng(seed, trial):
    return np.random.default_rng([int(seed), int(trial)])


def _single_orientation(config):
    if len(config.orientations) != 1:
        raise ValueError("sensitivity comparisons need a single-orientation config")
    return config.orientations[0]


def axial_larmor(config):
    """omega_L of the m_I = 0 species (half its transition frequency)."""
    cfg = replace(config, m_i_values=(0,))
    (w,) = exact_transitions(cfg).values()
    return w / 2


def _bumped(config, delta_b=ONE_NT):
    b = np.asarray(config.b_dc, dtype=float)
    norm = np.linalg.norm(b)
    if norm == 0:
        raise ValueError("field magnitude must be nonzero to define a magnitude step")
    return config.with_(b_dc=tuple(b * (norm + delta_b) / norm))


def pulse_grid(max_t, step=2.5e-9):
    """All t_j = j*step strictly below ``max_t``."""
    count = int(np.ceil(max_t / step - 1e-9))
    if count < 2:
        raise ValueError("max_t must admit at least two pulse durations")
    return Grid(0.0, step, count)


def _rabi_of(config, label):
    return rabi_frequencies(config.b_mw, config.gamma)[LABELS.index(label)]


def _chi_ci(s_ratio, n, level=0.95):
    """CI for a ratio proportional to a sample standard deviation."""
    if n < 2:
        return np.nan, np.nan
    lo = np.sqrt((n - 1) / stats.chi2.ppf(0.5 + level / 2, n - 1))
    hi = np.sqrt((n - 1) / stats.chi2.ppf(0.5 - level / 2, n - 1))
    return s_ratio * lo, s_ratio * hi


def monte_carlo_ratio(config, tau_opt_s, sigma, trials, max_t, window=WindowKind.BOXCAR, hyperfine=True, seed=0, t_step=2.5e-9):
    """Estimate eta_VPDR / eta_R at one free-evolution time.

    f_VPDR is the windowed inner product at the bare Rabi frequency over
    pulse durations below ``max_t``; f_R is the summed signal at the pi pulse.
    Slopes come from a 1 nT increase in field magnitude.  Delta f_VPDR is the
    sample standard deviation over noisy trials; Delta f_R = sigma/sqrt(N).
    """
    if trials < 2:
        raise ValueError("trials must be at least 2")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    label = _single_orientation(config)
    cfg = config.with_(m_i_values=(-1, 0, 1) if hyperfine else (0,), phases=(0.0, np.pi))
    omega = _rabi_of(cfg, label)
    t_grid = pulse_grid(max_t, t_step)
    n = t_grid.count
    tau_grid = Grid(float(tau_opt_s), 1e-9, 1)
    t_pi = np.pi / omega

    def signals(c):
        s_v = simulate_grid(c.with_(t_grid=t_grid, tau_grid=tau_grid))
        s_r = simulate_grid(c.with_(t_grid=Grid(t_pi, t_step, 1), tau_grid=tau_grid)).values[0, 0]
        return s_v, s_r

    (sv0, sr0), (sv1, sr1) = signals(cfg), signals(_bumped(cfg))
    d_omega = axial_larmor(_bumped(cfg)) - axial_larmor(cfg)
    fv0 = f_traces(sv0, [omega], window)[0, 0]
    fv1 = f_traces(sv1, [omega], window)[0, 0]
    slope_v = (fv1 - fv0) / d_omega
    slope_r = (sr1 - sr0) / d_omega
    if slope_v == 0 or slope_r == 0:
        return SensitivityRatio(np.inf, "monte_carlo", WindowKind(window).value, trials, sigma, seed)

    # f is linear in S, so only the noise part needs to be pushed through
    weights = inner_product_weights(sv0.t_axis, omega, window)[0]
    noisy = np.array([weights @ _rng(seed, k).normal(0.0, sigma, n) for k in range(trials)])
    df_v = float(np.std(noisy, ddof=1))
    df_r = sigma / np.sqrt(n)
    ratio = (df_v / abs(slope_v)) / (df_r / abs(slope_r))
    exact = (sigma * np.linalg.norm(weights) / abs(slope_v)) / (df_r / abs(slope_r))
    lo, hi = _chi_ci(ratio, trials)
    return SensitivityRatio(ratio, "monte_carlo", WindowKind(window).value, trials, sigma, seed, lo, hi, exact)


@dataclass
class FitCostResult:
    tau_max: float
    ratio: float
    ci_low: float
    ci_high: float
    trials_used: int
    failures: int
    n_tau: int


def fit_cost_ratio(
    config,
    tau_max_values,
    sigma,
    trials,
    hyperfine=True,
    seed=0,
    max_t=800e-9,
    t_step=2.5e-9,
    tau_step=20e-9,
    window=WindowKind.BLACKMAN,
    tau_opt_s=None,
):
    """Cost of fitting many free-evolution times relative to tau_opt (VPDR).

    For each tau_max, noise is added to S(t_j, tau_k) for tau_k < tau_max,
    f(tau_k) is formed and fitted (one sinusoid without hyperfine structure,
    three with); the spread of the fitted omega_L gives Delta B_fit and the
    result is Delta B_fit sqrt(M) / Delta B_opt.
    """
    if trials < 2:
        raise ValueError("trials must be at least 2")
    label = _single_orientation(config)
    cfg = config.with_(m_i_values=(-1, 0, 1) if hyperfine else (0,), phases=(0.0, np.pi))
    omega = _rabi_of(cfg, label)
    omega_l = axial_larmor(cfg)
    t_grid = pulse_grid(max_t, t_step)
    if tau_opt_s is None:
        tau_opt_s = tau_opt(omega_l, cfg.t2_star, hyperfine, cfg.hyperfine_a)

    # Delta B_opt from linear propagation at tau_opt (the MC estimate of the
    # same quantity converges to this)
    tg = Grid(float(tau_opt_s), 1e-9, 1)
    s0 = simulate_grid(cfg.with_(t_grid=t_grid, tau_grid=tg))
    s1 = simulate_grid(_bumped(cfg).with_(t_grid=t_grid, tau_grid=tg))
    d_omega = axial_larmor(_bumped(cfg)) - omega_l
    slope = (f_traces(s1, [omega], window)[0, 0] - f_traces(s0, [omega], window)[0, 0]) / d_omega
    weights = inner_product_weights(s0.t_axis, omega, window)[0]
    db_opt = sigma * np.linalg.norm(weights) / abs(slope)

    mode = "triplet" if hyperfine else "single"
    out = []
    for tau_max in np.atleast_1d(tau_max_values):
        count = int(np.ceil(tau_max / tau_step - 1e-9))
        if count == 1:
            # a single sample at tau_opt: the estimate is the linear one
            out.append(FitCostResult(float(tau_max), 1.0, 1.0, 1.0, trials, 0, 1))
            continue
        sig = simulate_grid(cfg.with_(t_grid=t_grid, tau_grid=Grid(0.0, tau_step, count)))
        clean = f_traces(sig, [omega], window)[0]
        ref = fit_ramsey(clean, sig.tau_axis, cfg.hyperfine_a, mode=mode, t2_star=cfg.t2_star)
        # noise on f(tau_k) from independent noise on every S(t_j, tau_k)
        estimates, failures = [], 0
        for k in range(trials):
            noise = weights @ _rng(seed, k).normal(0.0, sigma, (t_grid.count, count))
            try:
                fit = fit_ramsey(clean + noise, sig.tau_axis, cfg.hyperfine_a, initial=ref.model, mode=mode, t2_star=cfg.t2_star)
            except (ValueError, np.linalg.LinAlgError):
                failures += 1
                continue
            if not fit.converged or abs(fit.model.omega0 - ref.model.omega0) > cfg.hyperfine_a / 2:
                failures += 1
                continue
            estimates.append(fit.model.omega0)
        if len(estimates) < 2:
            out.append(FitCostResult(float(tau_max), np.nan, np.nan, np.nan, len(estimates), failures, count))
            continue
        db_fit = float(np.std(estimates, ddof=1))
        r = db_fit * np.sqrt(count) / db_opt
        lo, hi = _chi_ci(r, len(estimates))
        out.append(FitCostResult(float(tau_max), r, lo, hi, len(estimates), failures, count))
    return out
