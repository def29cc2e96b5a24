"""Diamond crystal geometry: NV axes, local frames, field projections.

Axes are given in conventional-cell coordinates (x || [100], y || [010],
z || [001]).  The sign convention is fixed: each NV axis is the cube
diagonal with a positive z-component except [11-1], whose listed vector is
(1, 1, -1)/sqrt(3).  Every per-orientation output carries its axis vector,
so nothing downstream depends on the label strings.
"""

from dataclasses import dataclass, field

import numpy as np

from .constants import GAMMA

_AXIS_VECTORS = {
    "111": (1.0, 1.0, 1.0),
    "-111": (-1.0, 1.0, 1.0),
    "1-11": (1.0, -1.0, 1.0),
    "11-1": (1.0, 1.0, -1.0),
}
LABELS = tuple(_AXIS_VECTORS)


def _unit(v):
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return v / n


def _perpendicular_x(axis, hint=None):
    """Unit vector perpendicular to ``axis``.

    Uses the transverse part of ``hint`` when it is not (numerically) parallel
    to the axis; otherwise Gram-Schmidt against crystal x, then y.
    """
    candidates = [] if hint is None else [np.asarray(hint, dtype=float)]
    candidates += [np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])]
    for c in candidates:
        perp = c - np.dot(c, axis) * axis
        norm = np.linalg.norm(perp)
        if norm > 1e-12 * max(np.linalg.norm(c), 1e-300):
            return perp / norm
    raise RuntimeError("no perpendicular direction found")  # unreachable for unit axes


def rotation_for(axis, x_hint=None):
    """Rotation matrix (rows = local x, y, z in crystal coordinates)."""
    z = _unit(axis)
    x = _perpendicular_x(z, x_hint)
    y = np.cross(z, x)
    return np.vstack([x, y, z])


@dataclass(frozen=True)
class NvOrientation:
    label: str
    axis: np.ndarray
    rotation: np.ndarray = field(repr=False)

    def local(self, b_crystal, x_hint=None):
        """Express a crystal-frame vector in this orientation's local frame.

        With ``x_hint`` the local x axis follows the hint's transverse part
        (the MW field, in practice).
        """
        rot = self.rotation if x_hint is None else rotation_for(self.axis, x_hint)
        return rot @ np.asarray(b_crystal, dtype=float)


@dataclass(frozen=True)
class LocalFieldDecomposition:
    b_axial: float
    b_perp: float
    local_x: np.ndarray


def nv_axes():
    """The four NV orientations in a fixed order (see LABELS)."""
    out = []
    for label, v in _AXIS_VECTORS.items():
        axis = _unit(v)
        out.append(NvOrientation(label, axis, rotation_for(axis)))
    return out


def orientation(label):
    for o in nv_axes():
        if o.label == label:
            return o
    raise KeyError(f"unknown NV orientation {label!r}; expected one of {LABELS}")


def mw_direction_from_angles(theta_deg, phi_deg):
    """Unit vector from polar/azimuthal angles (degrees) in crystal coordinates."""
    th, ph = np.deg2rad(theta_deg), np.deg2rad(phi_deg)
    return np.array([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])


def angles_from_direction(v):
    """Inverse of :func:`mw_direction_from_angles`, returns (theta_deg, phi_deg)."""
    v = _unit(v)
    # atan2 keeps full precision near the poles, where arccos(z) does not
    return float(np.rad2deg(np.arctan2(np.hypot(v[0], v[1]), v[2]))), float(np.rad2deg(np.arctan2(v[1], v[0])))


def project_field(b, orient):
    """Split ``b`` into its signed axial part and transverse magnitude."""
    b = np.asarray(b, dtype=float)
    axial = float(np.dot(b, orient.axis))
    perp_vec = b - axial * orient.axis
    b_perp = float(np.linalg.norm(perp_vec))
    return LocalFieldDecomposition(axial, b_perp, _perpendicular_x(orient.axis, perp_vec))


def rabi_frequencies(b_mw, gamma=GAMMA):
    """Bare Rabi frequencies gamma*|b_mw x axis_i| (rad/s) in LABELS order."""
    b_mw = np.asarray(b_mw, dtype=float)
    return np.array([gamma * np.linalg.norm(np.cross(b_mw, o.axis)) for o in nv_axes()])


def axis_matrix():
    """4x3 array of unit axes, rows in LABELS order."""
    return np.array([o.axis for o in nv_axes()])


def rabi_fractions(directions):
    """Omega_i / Omega_max for an (..., 3) stack of MW directions (vectorized)."""
    d = np.asarray(directions, dtype=float)
    d = d / np.linalg.norm(d, axis=-1, keepdims=True)
    cos = d @ axis_matrix().T
    return np.sqrt(np.clip(1.0 - cos**2, 0.0, None))
