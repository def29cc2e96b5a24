"""Physical constants and unit conversions.

Everything inside the package is SI with angular frequencies in rad/s.
Cycle-based units (MHz, ns, uT) only appear at file/CLI boundaries and go
through the helpers below.
"""

import numpy as np

TWO_PI = 2.0 * np.pi

# Electron gyromagnetic ratio gamma/(2 pi) in Hz/T (g ~ 2.003).
GAMMA_HZ_PER_T = 28.024e9
GAMMA = TWO_PI * GAMMA_HZ_PER_T  # rad/s/T

# Ground-state zero-field splitting and 14N axial hyperfine constant, rad/s.
ZFS = TWO_PI * 2.87e9
HYPERFINE_A = TWO_PI * 2.16e6

# Above this field the free-Hamiltonian eigenbasis labelling gets unreliable.
VALIDITY_FIELD_T = 10e-3


def mhz_to_rad(f_mhz):
    """Cycle frequency in MHz -> angular frequency in rad/s."""
    return np.multiply(f_mhz, TWO_PI * 1e6)


def rad_to_mhz(w):
    """Angular frequency in rad/s -> cycle frequency in MHz."""
    return np.divide(w, TWO_PI * 1e6)


def larmor_to_field(omega):
    """Axial Larmor frequency (rad/s) -> field in tesla."""
    return omega / GAMMA


def field_to_larmor(b):
    """Field in tesla -> Larmor frequency (rad/s)."""
    return GAMMA * b


def transition_error_to_field(d_omega):
    """Error in a DQ transition frequency (rad/s) -> equivalent axial field (T).

    The DQ line sits at twice the Larmor frequency, hence the factor 2.
    """
    return d_omega / (2.0 * GAMMA)
