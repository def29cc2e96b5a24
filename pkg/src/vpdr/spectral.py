"""Window functions and windowed cosine / complex-exponential inner products.

The inner products are evaluated directly at arbitrary frequencies (no FFT)
so a trace can be taken exactly at nu = Omega_i.  Normalization divides by
sum cos^2 of the kernel argument in both dimensions.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np


class WindowKind(str, Enum):
    BOXCAR = "boxcar"
    BLACKMAN = "blackman"
    COSINE = "cosine"


def window_weights(kind, n_points, sym=False):
    """Window samples W(t_n), n = 0..N-1.

    Blackman uses 0.42 - 0.5 cos(2 pi n/N) + 0.08 cos(4 pi n/N); ``sym=True``
    switches to the N-1 denominator (symmetric variant).
    """
    kind = WindowKind(kind)
    if n_points < 2:
        raise ValueError("window needs at least 2 points")
    n = np.arange(n_points)
    if kind is WindowKind.BOXCAR:
        return np.ones(n_points)
    if kind is WindowKind.BLACKMAN:
        big_n = n_points - 1 if sym else n_points
        return 0.42 - 0.5 * np.cos(2 * np.pi * n / big_n) + 0.08 * np.cos(4 * np.pi * n / big_n)
    return np.sin(np.pi * n / (n_points - 1))


def window_shape(kind):
    """Continuous window profile on x in [0, 1] (used for continuum means)."""
    kind = WindowKind(kind)
    if kind is WindowKind.BOXCAR:
        return lambda x: np.ones_like(np.asarray(x, dtype=float))
    if kind is WindowKind.BLACKMAN:
        return lambda x: 0.42 - 0.5 * np.cos(2 * np.pi * np.asarray(x)) + 0.08 * np.cos(4 * np.pi * np.asarray(x))
    return lambda x: np.sin(np.pi * np.asarray(x))


def _kernel(kind):
    if kind in ("cos", "cosine"):
        return lambda arg: np.cos(arg)
    if kind in ("exp", "complex", "complex-exponential"):
        return lambda arg: np.exp(-1j * arg)
    raise ValueError(f"kernel must be 'cos' or 'exp', got {kind!r}")


def _is_cos(kind):
    return kind in ("cos", "cosine")


def _check_nyquist(freqs, axis, name):
    if axis.size < 2:
        return
    step = axis[1] - axis[0]
    limit = np.pi / step
    if np.max(np.abs(freqs)) > limit * (1 + 1e-12):
        raise ValueError(f"{name} frequency exceeds the Nyquist limit {limit:.6g} rad/s of its grid")


def _normalizers(freqs, axis):
    denom = np.sum(np.cos(np.outer(freqs, axis)) ** 2, axis=1)
    if np.any(denom < 1e-12 * axis.size):
        raise ValueError("degenerate normalization: sum cos^2(freq * t) vanishes for a requested frequency")
    return denom


@dataclass
class SpectralMap:
    values: np.ndarray  # [a, b] over (nu_a, omega_b)
    nu_axis: np.ndarray
    omega_axis: np.ndarray
    kernel: str = "cos"
    window: WindowKind = WindowKind.BOXCAR

    def __post_init__(self):
        for name in ("nu_axis", "omega_axis"):
            ax = np.asarray(getattr(self, name), dtype=float)
            if ax.size > 1 and np.any(np.diff(ax) <= 0):
                raise ValueError(f"{name} must be strictly increasing")
            setattr(self, name, ax)
        self.window = WindowKind(self.window)


def inner_product_weights(t_axis, nu, window=WindowKind.BLACKMAN, kernel="cos", sym=False):
    """Weights w[a, j] with f(tau_k, nu_a) = sum_j w[a, j] S(t_j, tau_k)."""
    nu = np.atleast_1d(np.asarray(nu, dtype=float))
    t = np.asarray(t_axis, dtype=float)
    _check_nyquist(nu, t, "pulse-duration")
    w = window_weights(window, t.size, sym=sym) if t.size >= 2 else np.ones(1)
    denom = _normalizers(nu, t)
    return _kernel(kernel)(np.outer(nu, t)) * w[None, :] / denom[:, None]


def f_traces(signal, nu, window=WindowKind.BLACKMAN, kernel="cos", sym=False):
    """f(tau_k, nu_a) for an array of nu; returns shape (len(nu), M)."""
    return inner_product_weights(signal.t_axis, nu, window, kernel, sym) @ signal.values


def f_trace(signal, nu, window=WindowKind.BLACKMAN, kernel="cos", sym=False):
    """Windowed inner product along the pulse-duration axis at one nu."""
    return f_traces(signal, [nu], window, kernel, sym)[0]


def spectral_map(signal, nu_axis, omega_axis, window=WindowKind.BLACKMAN, kernel="cos"):
    """Mean-subtracted double inner product I(nu, omega)."""
    nu_axis = np.asarray(nu_axis, dtype=float)
    omega_axis = np.asarray(omega_axis, dtype=float)
    if nu_axis.size == 0 or omega_axis.size == 0:
        raise ValueError("frequency axes must be non-empty")
    tau = signal.tau_axis
    _check_nyquist(omega_axis, tau, "free-evolution")
    f = f_traces(signal, nu_axis, window, kernel)
    f = f - f.mean(axis=1, keepdims=True)
    denom = _normalizers(omega_axis, tau)
    k = _kernel(kernel)(np.outer(tau, omega_axis))
    values = (f @ k) / denom[None, :]
    if _is_cos(kernel):
        values = values.real
    return SpectralMap(values, nu_axis, omega_axis, kernel, WindowKind(window))


def rabi_spectrum(signal, nu_axis, window=WindowKind.BLACKMAN, kernel="cos"):
    """sum_k f(tau_k, nu) -- peaks near each orientation's Rabi frequency."""
    out = f_traces(signal, nu_axis, window, kernel).sum(axis=1)
    return out.real if _is_cos(kernel) else out


def filter_function(window, t_axis, nu):
    """F(nu) = sum_j W(t_j) cos(nu t_j)."""
    t_axis = np.asarray(t_axis, dtype=float)
    w = window_weights(window, t_axis.size)
    return np.cos(np.outer(np.atleast_1d(nu), t_axis)) @ w


def trace_spectrum(trace, tau_axis, omega_axis):
    """|sum_k (f_k - mean) e^{-i omega tau_k}| for a single tau-trace."""
    f = np.asarray(trace) - np.mean(trace)
    return np.abs(np.exp(-1j * np.outer(omega_axis, tau_axis)) @ f)
