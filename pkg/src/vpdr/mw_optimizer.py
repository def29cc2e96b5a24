"""MW field direction that keeps the four Rabi frequencies and their
half/integer harmonics apart.

The score of a direction is min |Omega_i - n Omega_j| / Omega_max over
ordered pairs i != j and n in {1/2, 1, 3/2, 2}.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .frames import angles_from_direction, mw_direction_from_angles, rabi_fractions

HARMONICS = (0.5, 1.0, 1.5, 2.0)
WEDGE = ((0.0, 90.0), (0.0, 45.0))  # symmetry-reduced (theta, phi) in degrees


@dataclass(frozen=True)
class SeparationResult:
    theta_deg: float
    phi_deg: float
    min_separation_frac: float
    limiting_pair: tuple  # (i, j, n): |Omega_i - n Omega_j| is the minimum
    rabi_fracs: tuple


def _separation_stack(fracs, harmonics):
    """min separation and argmin (i, j, n) for an (..., 4) stack of fractions."""
    fracs = np.asarray(fracs, dtype=float)
    n = np.asarray(harmonics, dtype=float)
    diff = np.abs(fracs[..., :, None, None] - n[None, None, :] * fracs[..., None, :, None])
    eye = np.eye(4, dtype=bool)[:, :, None]
    diff = np.where(eye, np.inf, diff)
    flat = diff.reshape(diff.shape[:-3] + (-1,))
    arg = np.argmin(flat, axis=-1)
    best = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    return best, arg


def min_harmonic_separation(direction, harmonics=HARMONICS):
    """Score one MW direction (normalized internally)."""
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    fracs = rabi_fractions(d)
    best, arg = _separation_stack(fracs, harmonics)
    i, rest = divmod(int(arg), 4 * len(harmonics))
    j, k = divmod(rest, len(harmonics))
    theta, phi = angles_from_direction(d)
    return SeparationResult(theta, phi, float(best), (i, j, harmonics[k]), tuple(float(f) for f in fracs))


def separation_map(thetas_deg, phis_deg, harmonics=HARMONICS):
    """(separation, min Rabi fraction) on a theta x phi grid (vectorized)."""
    th, ph = np.meshgrid(np.asarray(thetas_deg, float), np.asarray(phis_deg, float), indexing="ij")
    dirs = np.stack(mw_direction_from_angles(th, ph), axis=-1)
    fracs = rabi_fractions(dirs)
    sep, _ = _separation_stack(fracs, harmonics)
    return sep, fracs.min(axis=-1)


def _axis(lo, hi, step):
    if hi < lo:
        raise ValueError("range upper bound below lower bound")
    n = int(np.floor((hi - lo) / step + 1e-9))
    return lo + step * np.arange(n + 1)


def _local_maxima(values, mask):
    """Indices of grid points no smaller than any feasible 8-neighbour."""
    v = np.where(mask, values, -np.inf)
    padded = np.pad(v, 1, constant_values=-np.inf)
    center = padded[1:-1, 1:-1]
    is_max = mask.copy()
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            nb = padded[1 + di : padded.shape[0] - 1 + di, 1 + dj : padded.shape[1] - 1 + dj]
            is_max &= center >= nb
    return np.argwhere(is_max)


def optimize_direction(
    theta_range=WEDGE[0],
    phi_range=WEDGE[1],
    step_deg=0.25,
    constraint_min_rabi_frac=None,
    harmonics=HARMONICS,
    top=10,
):
    """Ranked local optima of the separation over a (theta, phi) grid.

    Each local maximum of the coarse grid is refined once on a grid of
    step/10 spanning its neighbourhood.  With ``constraint_min_rabi_frac``
    only directions where every Omega_i >= constraint * Omega_max count.
    Ranking: separation descending, then theta, then phi.
    """
    (t0, t1), (p0, p1) = theta_range, phi_range
    if not (WEDGE[0][0] <= t0 <= t1 <= WEDGE[0][1] and WEDGE[1][0] <= p0 <= p1 <= WEDGE[1][1]):
        raise ValueError("ranges must lie within theta in [0, 90] and phi in [0, 45] degrees")
    if step_deg <= 0:
        raise ValueError("step_deg must be positive")
    thetas, phis = _axis(t0, t1, step_deg), _axis(p0, p1, step_deg)
    sep, min_frac = separation_map(thetas, phis, harmonics)
    feasible = np.ones_like(sep, dtype=bool) if constraint_min_rabi_frac is None else min_frac >= constraint_min_rabi_frac
    if not feasible.any():
        raise ValueError("no direction in range satisfies the minimum Rabi-fraction constraint")
    candidates = []
    fine_step = step_deg / 10
    for i, j in _local_maxima(sep, feasible):
        ft = _axis(max(t0, thetas[i] - step_deg), min(t1, thetas[i] + step_deg), fine_step)
        fp = _axis(max(p0, phis[j] - step_deg), min(p1, phis[j] + step_deg), fine_step)
        fsep, ffrac = separation_map(ft, fp, harmonics)
        if constraint_min_rabi_frac is not None:
            fsep = np.where(ffrac >= constraint_min_rabi_frac, fsep, -np.inf)
        a, b = np.unravel_index(np.argmax(fsep), fsep.shape)
        candidates.append((ft[a], fp[b]))
    results = {}
    for th, ph in candidates:
        r = min_harmonic_separation(mw_direction_from_angles(th, ph), harmonics)
        r = SeparationResult(float(th), float(ph), r.min_separation_frac, r.limiting_pair, r.rabi_fracs)
        results[(round(th, 9), round(ph, 9))] = r
    ranked = sorted(results.values(), key=lambda r: (-r.min_separation_frac, r.theta_deg, r.phi_deg))
    return ranked[:top] if top else ranked


def write_map_csv(path, thetas_deg, phis_deg, harmonics=HARMONICS):
    """Heat-map rows: theta, phi, separation fraction, min Rabi fraction."""
    sep, min_frac = separation_map(thetas_deg, phis_deg, harmonics)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta_deg", "phi_deg", "separation_frac", "min_rabi_frac"])
        for a, th in enumerate(thetas_deg):
            for b, ph in enumerate(phis_deg):
                w.writerow([repr(float(th)), repr(float(ph)), repr(float(sep[a, b])), repr(float(min_frac[a, b]))])
