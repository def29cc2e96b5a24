"""Closed-form single-NV VPDR response.

Two regimes are provided: the hard-pulse limit (Omega >> omega_L) and the
finite Omega/omega_L Fourier expansion at zero detuning.  Quasi-static
Lorentzian dephasing during free evolution enters as exp(-|m| tau / T2*)
on the component oscillating at m*omega_L; dephasing during the pulses is
ignored here (the simulator covers it).

Phase convention: phi is the phase of the second pulse's drive as it
appears in the rotating-frame Hamiltonian, so phi = 0 means two identical
pulses and P0(t, 0) = cos^2(Omega t).  The SQ term of the hard-pulse
expression therefore carries -cos(delta*tau + phi)/2.
"""

from dataclasses import dataclass, replace

import numpy as np

from .constants import HYPERFINE_A

TWO_N_VALUES = tuple(range(-4, 5))  # n in {-2, -3/2, ..., 2} stored as 2n
M_VALUES = (-2, -1, 0, 1, 2)
M_I_VALUES = (-1, 0, 1)


@dataclass(frozen=True)
class AnalyticParams:
    omega_rabi: float
    omega_larmor: float
    detuning: float = 0.0
    phase: float = 0.0
    t2_star: float = np.inf
    theta_bright: float = 0.0

    def __post_init__(self):
        if self.omega_rabi < 0:
            raise ValueError("omega_rabi must be non-negative")
        if not self.t2_star > 0:
            raise ValueError("t2_star must be positive or inf")


def _decay(tau, t2_star, rate_multiple):
    if np.isinf(t2_star):
        return np.ones_like(np.asarray(tau, dtype=float))
    return np.exp(-rate_multiple * np.asarray(tau, dtype=float) / t2_star)


def p0_hard_pulse(t, tau, p):
    """|0> population in the Omega/omega_L -> inf, Omega/delta -> inf limit.

    ``t`` and ``tau`` broadcast against each other.  ``theta_bright`` rotates
    the second pulse's MW direction in the NV x-y plane.
    """
    t = np.asarray(t, dtype=float)
    tau = np.asarray(tau, dtype=float)
    x = p.omega_rabi * t
    y = p.omega_larmor * tau - p.theta_bright
    sq = -0.5 * np.cos(p.detuning * tau + p.phase) * np.sin(x) ** 2 * np.cos(y) * _decay(tau, p.t2_star, 1)
    dq = np.sin(x / 2) ** 4 * 0.5 * (1.0 + _decay(tau, p.t2_star, 2) * np.cos(2 * y))
    return np.cos(x / 2) ** 4 + sq + dq


@dataclass(frozen=True)
class FourierCoefficientTable:
    """a[n][m] for P0 = sum a e^{i n Omega_eff t} e^{i m omega_L tau}.

    Keys are (2n, m) so half-integer n stay exact; ``table[n, m]`` accepts
    n as a float.
    """

    coefficients: dict
    alpha: float
    phase: float

    def __getitem__(self, key):
        n, m = key
        return self.coefficients[(int(round(2 * n)), int(m))]

    def as_array(self):
        """9x5 array indexed [2n + 4, m + 2]."""
        out = np.zeros((9, 5))
        for (two_n, m), v in self.coefficients.items():
            out[two_n + 4, m + 2] = v
        return out


def fourier_table(alpha, phase=0.0):
    """Finite-alpha Fourier coefficients at zero detuning, no dephasing.

    ``alpha`` = Omega/omega_L may be negative (omega_L < 0); the auxiliary
    ``at`` = Omega_eff/omega_L then carries the same sign, which keeps P0
    even in omega_L.
    """
    a = float(alpha)
    if a == 0.0 or not np.isfinite(a):
        raise ValueError("alpha must be finite and nonzero; use p0_hard_pulse or the simulator instead")
    t = np.sign(a) * np.sqrt(a * a + 4.0)
    c = np.cos(phase)
    a2, a4, a6, a8 = a**2, a**4, a**6, a**8
    t8, t9 = t**8, t**9
    T = {
        (4, -2): (a8 * (t - 8) + 32 * a6 * (t - 3) + 128 * a4 * (t - 2)) / (64 * t9),
        (4, -1): a6 * (a2 * (t - 4) + 8 * (t - 2)) * c / (16 * t9),
        (4, 0): 3 * a8 / (32 * t8),
        (4, 1): a6 * (a2 * (t + 4) + 8 * (t + 2)) * c / (16 * t9),
        (4, 2): (a8 * (t + 8) + 32 * a6 * (t + 3) + 128 * a4 * (t + 2)) / (64 * t9),
        (3, -2): (a6 * (20 - 6 * t) - 32 * a4 * (t - 2) + a8) / (4 * t9),
        (3, -1): a4 * (16 * (t - 2) + a4 - 4 * a2) * c / (2 * t9),
        (3, 0): 3 * a6 / t8,
        (3, 1): a4 * (16 * (t + 2) - a4 + 4 * a2) * c / (2 * t9),
        (3, 2): -a4 * (a2 * (6 * t + 20) + 32 * (t + 2) + a4) / (4 * t9),
        (2, -2): -a4 * (a2 - 24) * (a2 * (t - 4) + 8 * (t - 2)) / (16 * t9),
        (2, -1): -a2 * (-4 * a4 * (t + 3) + 8 * a2 * (3 * t - 4) - 64 * (t - 2) + a6) * c / (2 * t9),
        (2, 0): a4 * (a4 - 16 * a2 + 256) / (8 * t8),
        (2, 1): a2 * (4 * a4 * (t - 3) - 8 * a2 * (3 * t + 4) + 64 * (t + 2) + a6) * c / (2 * t9),
        (2, 2): -a4 * (a2 - 24) * (a2 * (t + 4) + 8 * (t + 2)) / (16 * t9),
        (1, -2): -a4 * (3 * a2 - 16) * (-2 * t + a2 + 4) / (4 * t9),
        (1, -1): a2 * (-4 * a4 * (2 * t + 1) + 16 * a2 * (3 * t + 2) - 128 * (t - 2) + a6) * c / (2 * t9),
        (1, 0): a2 * (5 * a4 - 32 * a2 + 128) / t8,
        (1, 1): -a2 * (a4 * (8 * t - 4) + a2 * (32 - 48 * t) + 128 * (t + 2) + a6) * c / (2 * t9),
        (1, 2): a4 * (3 * a2 - 16) * (2 * t + a2 + 4) / (4 * t9),
        (0, 2): a4 * (3 * a4 - 96 * a2 + 128) / (32 * t8),
        (0, 1): -a2 * (a6 - 24 * a4 + 320 * a2 - 512) * c / (8 * t8),
        (0, 0): (9 * a8 + 64 * a6 + 1536 * a4 + 4096) / (16 * t8),
    }
    T[(0, -2)] = T[(0, 2)]
    T[(0, -1)] = T[(0, 1)]
    for (two_n, m) in [k for k in T if k[0] > 0]:
        T[(-two_n, -m)] = T[(two_n, m)]
    return FourierCoefficientTable({k: float(v) for k, v in T.items()}, a, float(phase))


def p0_finite_alpha(t, tau, p):
    """Finite Omega/omega_L response at zero detuning, Lorentzian dephasing."""
    if p.detuning != 0.0:
        raise ValueError("finite-alpha expressions hold at zero detuning only; use p0_hard_pulse for detuned input")
    if p.omega_larmor == 0.0:
        raise ValueError("omega_larmor must be nonzero (alpha undefined); use p0_hard_pulse, which is exact there")
    if p.theta_bright != 0.0:
        raise ValueError("theta_bright is only supported by p0_hard_pulse")
    table = fourier_table(p.omega_rabi / p.omega_larmor, p.phase)
    omega_eff = np.hypot(p.omega_rabi, 2.0 * p.omega_larmor)
    t = np.asarray(t, dtype=float)
    tau = np.asarray(tau, dtype=float)
    total = np.zeros(np.broadcast(t, tau).shape, dtype=complex)
    for (two_n, m), a in table.coefficients.items():
        if a == 0.0:
            continue
        total = total + a * _decay(tau, p.t2_star, abs(m)) * np.exp(
            1j * (0.5 * two_n * omega_eff * t + m * p.omega_larmor * tau)
        )
    if total.size and np.max(np.abs(total.imag)) > 1e-12:
        raise ArithmeticError("imaginary residual in Fourier sum exceeds tolerance")
    return total.real


def dq_first_quadrant_amplitudes(alpha):
    """|a[n][2]| for n = 1/2, 1, 3/2, 2."""
    table = fourier_table(alpha)
    return np.array([abs(table[n, 2]) for n in (0.5, 1.0, 1.5, 2.0)])


def _p0(regime):
    if regime == "hard":
        return p0_hard_pulse
    if regime == "finite":
        return p0_finite_alpha
    raise ValueError(f"regime must be 'hard' or 'finite', got {regime!r}")


def sq_cancelled_analytic(t, tau, p, regime="finite"):
    """P0(phi=0) + P0(phi=pi); the m = +-1 (SQ) content cancels."""
    f = _p0(regime)
    return f(t, tau, replace(p, phase=0.0)) + f(t, tau, replace(p, phase=np.pi))


def hyperfine_average(t, tau, p_ext, regime="finite", hyperfine_a=HYPERFINE_A, sq_cancel=False):
    """Average over m_I in {-1, 0, 1} with omega_L -> omega_L_ext + m_I A.

    With ``regime='finite'`` each component uses its own
    Omega_eff(m_I) = sqrt(Omega^2 + 4 (omega_L_ext + m_I A)^2).  A component
    with exactly zero Larmor frequency is evaluated with the hard-pulse
    expression, which is exact in that case.
    """
    acc = 0.0
    for m_i in M_I_VALUES:
        p = replace(p_ext, omega_larmor=p_ext.omega_larmor + m_i * hyperfine_a)
        reg = "hard" if (regime == "finite" and p.omega_larmor == 0.0) else regime
        if sq_cancel:
            acc = acc + sq_cancelled_analytic(t, tau, p, reg)
        else:
            acc = acc + _p0(reg)(t, tau, p)
    return acc / len(M_I_VALUES)


def rephasing_times(count, hyperfine_a=HYPERFINE_A):
    """Free-evolution times 2 pi s / (2A), s = 1..count, where the three
    hyperfine DQ oscillations realign."""
    s = np.arange(1, count + 1)
    return 2 * np.pi * s / (2 * hyperfine_a)


def dead_zone_larmor(epsilon, t2_star):
    """Smallest |omega_L| keeping the DQ slope within a factor ``epsilon`` of
    its large-field value: epsilon * e / (4 T2*)."""
    if not 0 < epsilon <= 1:
        raise ValueError("epsilon must lie in (0, 1]")
    if np.isinf(t2_star):
        return 0.0
    return epsilon * np.e / (4.0 * t2_star)
