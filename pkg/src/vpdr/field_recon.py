"""Vector field from unsigned per-orientation projections.

Each observed DQ peak gives |beta_i| = |omega_max - 2A| / (2 gamma), the
unsigned axial field of orientation i.  With data at several coil
voltages, a field linear in voltage, B(V) = b + s V, is fitted by
minimizing sum (|beta_i(V)| - |B(V) . z_i|)^2.  Only unsigned projections
enter, so B -> -B (and some axis permutations) leave the cost unchanged;
the returned branch depends on the starting point.
"""

import csv
import itertools
import json
from dataclasses import asdict, dataclass

import numpy as np

from .constants import GAMMA, HYPERFINE_A, mhz_to_rad
from .frames import LABELS, axis_matrix
from .lsq import levenberg_marquardt

HARMONICS = (0.5, 1.0, 1.5, 2.0)
UT = 1e-6


class HarmonicAssignmentError(ValueError):
    """nu_max / n < omega_max: the assumed harmonic cannot produce this peak."""


@dataclass(frozen=True)
class PeakObservation:
    orientation: str
    omega_max: float  # rad/s, free-evolution frequency of the peak
    nu_max: float  # rad/s, pulse-duration frequency of the peak
    harmonic: float  # n in {1/2, 1, 3/2, 2}
    voltage: float

    def __post_init__(self):
        if self.orientation not in LABELS:
            raise ValueError(f"unknown orientation {self.orientation!r}")
        if self.harmonic not in HARMONICS:
            raise ValueError(f"harmonic must be one of {HARMONICS}")
        if self.omega_max < 0 or self.nu_max < 0:
            raise ValueError("peak frequencies must be non-negative")


@dataclass(frozen=True)
class LinearFieldModel:
    offset: tuple  # (b_x, b_y, b_z) tesla
    slope: tuple  # (s_x, s_y, s_z) tesla/volt

    def __post_init__(self):
        if not (np.all(np.isfinite(self.offset)) and np.all(np.isfinite(self.slope))):
            raise ValueError("model parameters must be finite")

    def field(self, voltage):
        v = np.asarray(voltage, dtype=float)[..., None]
        return np.asarray(self.offset) + np.asarray(self.slope) * v

    def projections(self, voltage):
        """Unsigned projections on the four axes, shape (..., 4)."""
        return np.abs(self.field(voltage) @ axis_matrix().T)

    @property
    def params(self):
        return np.concatenate([self.offset, self.slope])

    @classmethod
    def from_params(cls, p):
        p = np.asarray(p, dtype=float)
        return cls(tuple(p[:3]), tuple(p[3:]))


def projection_from_peak(omega_max, hyperfine_a=HYPERFINE_A, gamma=GAMMA):
    """|beta| (tesla) from the m_I = +1 DQ peak frequency."""
    return np.abs(np.asarray(omega_max) - 2 * hyperfine_a) / (2 * gamma)


def bare_rabi_from_peak(peak):
    """Omega = sqrt(nu_max^2 / n^2 - omega_max^2)."""
    arg = (peak.nu_max / peak.harmonic) ** 2 - peak.omega_max**2
    if arg < 0:
        raise HarmonicAssignmentError(
            f"nu_max/n = {peak.nu_max / peak.harmonic:.6g} rad/s is below omega_max = {peak.omega_max:.6g} "
            f"rad/s for {peak.orientation} at {peak.voltage} V; harmonic n = {peak.harmonic} is inconsistent"
        )
    return float(np.sqrt(arg))


@dataclass
class HarmonicSuggestion:
    harmonic: float
    spread: float  # relative std of the implied bare Rabi frequency across voltages
    candidates: dict  # n -> spread (inf when inconsistent)


def suggest_harmonic(peaks):
    """Pick the n making one orientation's implied Rabi frequency most
    constant across voltages.  Returns a suggestion; nothing is assigned."""
    labels = {p.orientation for p in peaks}
    if len(labels) != 1:
        raise ValueError("suggest_harmonic expects peaks of one orientation")
    spreads = {}
    for n in HARMONICS:
        try:
            vals = np.array([bare_rabi_from_peak(PeakObservation(p.orientation, p.omega_max, p.nu_max, n, p.voltage)) for p in peaks])
        except HarmonicAssignmentError:
            spreads[n] = np.inf
            continue
        spreads[n] = float(np.std(vals) / np.mean(vals)) if vals.size > 1 and np.mean(vals) > 0 else np.inf
    best = min(spreads, key=lambda n: (spreads[n], n))
    return HarmonicSuggestion(best, spreads[best], spreads)


@dataclass
class FieldFit:
    model: LinearFieldModel
    residuals: np.ndarray  # tesla, per observation
    chi2: float  # tesla^2
    rms: float  # tesla
    converged: bool
    rank_deficient: bool
    non_unique: bool = True  # unsigned data never fix the overall sign
    message: str = ""


def _design(observations, hyperfine_a, gamma):
    axes = axis_matrix()
    idx = np.array([LABELS.index(o.orientation) for o in observations])
    volts = np.array([o.voltage for o in observations], dtype=float)
    beta = projection_from_peak(np.array([o.omega_max for o in observations]), hyperfine_a, gamma)
    return axes[idx], volts, beta


def chi2(model, observations, hyperfine_a=HYPERFINE_A, gamma=GAMMA):
    z, v, beta = _design(observations, hyperfine_a, gamma)
    pred = np.abs(np.einsum("ij,ij->i", model.offset + np.outer(v, model.slope), z))
    return float(np.sum((beta - pred) ** 2))


def _check_coverage(observations):
    volts = {o.voltage for o in observations}
    labels = {o.orientation for o in observations}
    if len(volts) < 3:
        raise ValueError("need observations at three or more voltages")
    if len(labels) < 3:
        raise ValueError("need observations from three or more orientations (rank deficient otherwise)")


def _orientation_patterns(volts):
    """Sign vectors over sorted unique voltages that a linear function can
    produce: constant, or one change of sign between neighbours."""
    n = volts.size
    pats = [np.ones(n), -np.ones(n)]
    for cut in range(1, n):
        p = np.ones(n)
        p[cut:] = -1.0
        pats += [p, -p]
    return pats


def _sign_pattern_starts(z, v, beta, keep=8, chunk=20000):
    """Exhaustive search over admissible sign patterns.

    The signed projection z_i . (b + s V) is linear in V, so per orientation
    its sign flips at most once along the voltage axis.  For each joint
    pattern the signed data are linear in (b, s) with a pattern-independent
    design matrix, so all candidates are solved with one pseudo-inverse.
    Returns the ``keep`` best parameter vectors.
    """
    A = np.hstack([z, z * v[:, None]])
    pinv = np.linalg.pinv(A)
    groups = {}
    for row, key in enumerate(map(tuple, z)):
        groups.setdefault(key, []).append(row)
    per_group = []
    for rows in groups.values():
        rows = np.array(rows)
        uv, inv = np.unique(v[rows], return_inverse=True)
        per_group.append((rows, [p[inv] for p in _orientation_patterns(uv)]))
    # overall sign is a symmetry: fix the first group's leading sign
    first_rows, first_pats = per_group[0]
    per_group[0] = (first_rows, [p for p in first_pats if p[0] > 0] or first_pats)
    combos = itertools.product(*[range(len(p)) for _, p in per_group])
    best = []
    while True:
        block = list(itertools.islice(combos, chunk))
        if not block:
            break
        S = np.empty((len(block), z.shape[0]))
        for c, choice in enumerate(block):
            for (rows, pats), k in zip(per_group, choice):
                S[c, rows] = pats[k]
        rhs = S * beta
        P = rhs @ pinv.T
        cost = np.sum((P @ A.T - rhs) ** 2, axis=1)
        order = np.argsort(cost)[:keep]
        best += [(cost[o], P[o]) for o in order]
        best = sorted(best, key=lambda t: t[0])[:keep]
    return [p for _, p in best]


def fit_linear_field(observations, initial=None, hyperfine_a=HYPERFINE_A, gamma=GAMMA, multistart=True):
    """Fit B(V) = b + s V to unsigned projections.

    Work is done in microtesla.  With ``initial`` the LM run starts there
    (and the branch found is the one nearest to it); otherwise, or with
    ``multistart``, linear least-squares solutions for sign patterns of the
    projections seed additional runs and the lowest chi^2 wins.
    """
    observations = list(observations)
    _check_coverage(observations)
    z, v, beta = _design(observations, hyperfine_a, gamma)
    beta_ut = beta / UT

    def resid(p):
        return np.abs(np.einsum("ij,ij->i", p[:3] + np.outer(v, p[3:]), z)) - beta_ut

    def jac(p):
        proj = np.einsum("ij,ij->i", p[:3] + np.outer(v, p[3:]), z)
        sg = np.where(proj >= 0, 1.0, -1.0)[:, None]
        return np.hstack([sg * z, sg * z * v[:, None]])

    starts = []
    if initial is not None:
        starts.append(initial.params / UT)
    if initial is None or multistart:
        starts += _sign_pattern_starts(z, v, beta_ut)
    best = None
    for p0 in starts:
        res = levenberg_marquardt(resid, p0, jac=jac)
        # ties keep the earlier start, so a supplied initial guess picks the branch
        if best is None or res.cost < best.cost * (1 - 1e-6) - 1e-24:
            best = res
    p = best.x * UT
    r = best.residuals * UT
    model = LinearFieldModel.from_params(p)
    c2 = float(np.sum(r**2))
    msg = "solution is one of several equivalent branches (unsigned projections)"
    return FieldFit(model, r, c2, float(np.sqrt(np.mean(r**2))), best.converged, best.rank_deficient, True, msg)


def synthetic_observations(model, voltages, labels=LABELS, hyperfine_a=HYPERFINE_A, gamma=GAMMA, rabi=2 * np.pi * 80e6, harmonic=1.0):
    """Peak observations generated from a known linear field."""
    out = []
    for v in voltages:
        proj = model.projections(v)
        for lbl in labels:
            beta = proj[LABELS.index(lbl)]
            om = 2 * gamma * beta + 2 * hyperfine_a
            nu = harmonic * np.hypot(rabi, om)
            out.append(PeakObservation(lbl, float(om), float(nu), harmonic, float(v)))
    return out


# --------------------------------------------------------------------------
# files


def read_peaks_csv(path):
    """Rows: voltage, orientation_index, omega_max_MHz, nu_max_MHz, harmonic_n."""
    out = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"voltage", "orientation_index", "omega_max_MHz", "nu_max_MHz", "harmonic_n"}
        missing = need - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"peak CSV is missing columns: {sorted(missing)}")
        for line, row in enumerate(reader, start=2):
            try:
                i = int(row["orientation_index"])
                out.append(
                    PeakObservation(
                        LABELS[i],
                        float(mhz_to_rad(float(row["omega_max_MHz"]))),
                        float(mhz_to_rad(float(row["nu_max_MHz"]))),
                        float(row["harmonic_n"]),
                        float(row["voltage"]),
                    )
                )
            except (ValueError, IndexError) as exc:
                raise ValueError(f"peak CSV line {line}: {exc}") from exc
    return out


def write_fit_json(path, fit):
    data = {
        "offset_ut": [x / UT for x in fit.model.offset],
        "slope_ut_per_v": [x / UT for x in fit.model.slope],
        "chi2_ut2": fit.chi2 / UT**2,
        "rms_ut": fit.rms / UT,
        "converged": fit.converged,
        "rank_deficient": fit.rank_deficient,
        "non_unique": fit.non_unique,
        "note": fit.message,
    }
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2)


def write_residuals_csv(path, observations, fit):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["voltage", "orientation", "residual_ut"])
        for o, r in zip(observations, fit.residuals):
            w.writerow([repr(o.voltage), o.orientation, repr(float(r / UT))])


def observation_dict(o):
    return asdict(o)
