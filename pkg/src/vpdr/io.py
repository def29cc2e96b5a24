"""File formats: YAML configs, signal grids, spectral maps, result CSVs and
run manifests.

Inside the package everything is SI with rad/s.  Files carry cycle-based
units spelled out in their key or column names (``omega_max_mhz``,
``t_ns``, ``b_dc_ut``); the conversions all go through ``constants``.
"""

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
import yaml

from .constants import mhz_to_rad, rad_to_mhz
from .frames import LABELS, angles_from_direction, mw_direction_from_angles
from .lindblad import Grid, SignalGrid, VpdrConfig
from .spectral import SpectralMap, WindowKind

FORMAT_VERSION = 1
NS = 1e-9
US = 1e-6
UT = 1e-6


class ConfigError(ValueError):
    """A config field is missing or invalid; ``field`` names it."""

    def __init__(self, field_name, problem):
        super().__init__(f"config field '{field_name}': {problem}")
        self.field = field_name


class FileFormatError(ValueError):
    """A data file could not be parsed."""


# --------------------------------------------------------------------------
# config


def _number(d, key, where=None, required=True, default=None):
    name = f"{where}.{key}" if where else key
    if key not in d or d[key] is None:
        if required:
            raise ConfigError(name, "missing")
        return default
    v = d[key]
    if isinstance(v, str) and v.strip().lower() in ("inf", "infinity"):
        return math.inf
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(name, f"expected a number, got {v!r}")
    if not math.isfinite(v) and not math.isinf(v):
        raise ConfigError(name, "must not be NaN")
    return float(v)


def _grid(d, key):
    g = d.get(key)
    if g is None:
        raise ConfigError(key, "missing")
    if not isinstance(g, dict):
        raise ConfigError(key, "expected a mapping with start_ns, step_ns, count")
    start = _number(g, "start_ns", key, required=False, default=0.0)
    step = _number(g, "step_ns", key)
    count = g.get("count")
    if count is None:
        raise ConfigError(f"{key}.count", "missing")
    if isinstance(count, bool) or not isinstance(count, int) or count < 1:
        raise ConfigError(f"{key}.count", f"must be an integer >= 1, got {count!r}")
    if step <= 0:
        raise ConfigError(f"{key}.step_ns", "must be positive")
    return Grid(start * NS, step * NS, count)


def _direction(d, key):
    v = d.get(key)
    if v is None:
        raise ConfigError(key, "missing")
    if isinstance(v, dict):
        return mw_direction_from_angles(_number(v, "theta_deg", key), _number(v, "phi_deg", key))
    try:
        vec = np.asarray(v, dtype=float).reshape(3)
    except (TypeError, ValueError):
        raise ConfigError(key, "expected {theta_deg, phi_deg} or a 3-vector") from None
    if not np.linalg.norm(vec) > 0:
        raise ConfigError(key, "direction vector must be nonzero")
    return vec


def _b_dc(d):
    v = d.get("b_dc_ut")
    if v is None:
        raise ConfigError("b_dc_ut", "missing")
    if isinstance(v, dict):
        mag = _number(v, "magnitude", "b_dc_ut")
        return mag * UT * mw_direction_from_angles(_number(v, "theta_deg", "b_dc_ut"), _number(v, "phi_deg", "b_dc_ut"))
    try:
        return np.asarray(v, dtype=float).reshape(3) * UT
    except (TypeError, ValueError):
        raise ConfigError("b_dc_ut", "expected a 3-vector in uT or {magnitude, theta_deg, phi_deg}") from None


KNOWN_KEYS = {
    "b_dc_ut",
    "omega_max_mhz",
    "mw_direction",
    "t_grid",
    "tau_grid",
    "t2_star_us",
    "mw_frequency_mhz",
    "phases_deg",
    "orientations",
    "m_i_values",
}


def config_from_dict(d):
    """VpdrConfig from the unit-suffixed mapping used in config files."""
    if not isinstance(d, dict):
        raise ConfigError("<root>", "config must be a mapping")
    unknown = set(d) - KNOWN_KEYS
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown key")
    omega_max = _number(d, "omega_max_mhz")
    if omega_max < 0:
        raise ConfigError("omega_max_mhz", "must be non-negative")
    t2 = _number(d, "t2_star_us", required=False, default=2.0)
    if not t2 > 0:
        raise ConfigError("t2_star_us", "must be positive (or inf)")
    freq = _number(d, "mw_frequency_mhz", required=False)
    phases = d.get("phases_deg", [0, 180])
    if not isinstance(phases, list) or not phases:
        raise ConfigError("phases_deg", "expected a non-empty list")
    ph = []
    for p in phases:
        if p not in (0, 180):
            raise ConfigError("phases_deg", f"phases must be 0 or 180, got {p!r}")
        ph.append(0.0 if p == 0 else np.pi)
    labels = d.get("orientations", list(LABELS))
    if not isinstance(labels, list) or not labels or any(lbl not in LABELS for lbl in labels):
        raise ConfigError("orientations", f"expected a non-empty list drawn from {list(LABELS)}")
    m_i = d.get("m_i_values", [-1, 0, 1])
    if not isinstance(m_i, list) or not m_i or any(m not in (-1, 0, 1) or isinstance(m, bool) for m in m_i):
        raise ConfigError("m_i_values", "expected a non-empty list drawn from [-1, 0, 1]")
    return VpdrConfig(
        b_dc=_b_dc(d),
        omega_max=float(mhz_to_rad(omega_max)),
        mw_direction=_direction(d, "mw_direction"),
        t_grid=_grid(d, "t_grid"),
        tau_grid=_grid(d, "tau_grid"),
        t2_star=t2 * US,
        mw_frequency=None if freq is None else float(mhz_to_rad(freq)),
        phases=tuple(ph),
        orientations=tuple(labels),
        m_i_values=tuple(int(m) for m in m_i),
    )


def _grid_dict(g):
    return {"start_ns": g.start / NS, "step_ns": g.step / NS, "count": int(g.count)}


def config_to_dict(cfg):
    theta, phi = angles_from_direction(cfg.mw_direction)
    return {
        "b_dc_ut": [float(x / UT) for x in cfg.b_dc],
        "omega_max_mhz": float(rad_to_mhz(cfg.omega_max)),
        "mw_direction": {"theta_deg": float(theta), "phi_deg": float(phi)},
        "t_grid": _grid_dict(cfg.t_grid),
        "tau_grid": _grid_dict(cfg.tau_grid),
        "t2_star_us": "inf" if math.isinf(cfg.t2_star) else cfg.t2_star / US,
        "mw_frequency_mhz": None if cfg.mw_frequency is None else float(rad_to_mhz(cfg.mw_frequency)),
        "phases_deg": [0 if np.isclose(p, 0) else 180 for p in cfg.phases],
        "orientations": list(cfg.orientations),
        "m_i_values": [int(m) for m in cfg.m_i_values],
    }


def load_yaml(path):
    try:
        with open(path) as fh:
            return yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError("<file>", f"not valid YAML: {exc}") from exc


def load_config(path):
    """Read a YAML config.  Extra sections (e.g. ``sweep:``) are returned
    alongside so commands can pick their own options."""
    data = load_yaml(path)
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a mapping")
    sim = data.get("simulation", data)
    extras = {k: v for k, v in data.items() if k != "simulation"} if "simulation" in data else {}
    return config_from_dict(sim), extras


# Internal constants are not part of the file format; the exact SI config is
# stored in binary files so re-reading is bit-exact.
def _config_exact(cfg):
    d = {
        "b_dc": [float(x) for x in cfg.b_dc],
        "omega_max": float(cfg.omega_max),
        "mw_direction": [float(x) for x in cfg.mw_direction],
        "t_grid": [cfg.t_grid.start, cfg.t_grid.step, int(cfg.t_grid.count)],
        "tau_grid": [cfg.tau_grid.start, cfg.tau_grid.step, int(cfg.tau_grid.count)],
        "t2_star": "inf" if math.isinf(cfg.t2_star) else float(cfg.t2_star),
        "mw_frequency": cfg.mw_frequency,
        "phases": [float(p) for p in cfg.phases],
        "orientations": list(cfg.orientations),
        "m_i_values": [int(m) for m in cfg.m_i_values],
        "zfs": float(cfg.zfs),
        "hyperfine_a": float(cfg.hyperfine_a),
        "gamma": float(cfg.gamma),
    }
    return d


def _config_from_exact(d):
    return VpdrConfig(
        b_dc=d["b_dc"],
        omega_max=d["omega_max"],
        mw_direction=d["mw_direction"],
        t_grid=Grid(*d["t_grid"]),
        tau_grid=Grid(*d["tau_grid"]),
        t2_star=math.inf if d["t2_star"] == "inf" else d["t2_star"],
        mw_frequency=d["mw_frequency"],
        phases=tuple(d["phases"]),
        orientations=tuple(d["orientations"]),
        m_i_values=tuple(d["m_i_values"]),
        zfs=d["zfs"],
        hyperfine_a=d["hyperfine_a"],
        gamma=d["gamma"],
    )


# --------------------------------------------------------------------------
# signal grids


def save_signal(path, grid):
    """Binary (npz) SignalGrid; values and axes round-trip bitwise."""
    cfg = json.dumps(_config_exact(grid.config)) if grid.config is not None else ""
    with open(path, "wb") as fh:
        np.savez(
            fh,
            format_version=np.int64(FORMAT_VERSION),
            kind=np.str_("signal_grid"),
            values=grid.values,
            t_axis=grid.t_axis,
            tau_axis=grid.tau_axis,
            sq_cancelled=np.bool_(grid.sq_cancelled),
            config=np.str_(cfg),
            metadata=np.str_(json.dumps(grid.metadata, default=str)),
        )


def _open_npz(path, kind):
    try:
        data = np.load(path, allow_pickle=False)
        stored = str(data["kind"])
        version = int(data["format_version"])
    except (OSError, ValueError, KeyError, EOFError) as exc:
        raise FileFormatError(f"{path}: not a readable {kind} file ({exc})") from exc
    if stored != kind:
        raise FileFormatError(f"{path}: holds a {stored}, expected {kind}")
    if version != FORMAT_VERSION:
        raise FileFormatError(f"{path}: format version {version} is not supported")
    return data


def load_signal(path):
    data = _open_npz(path, "signal_grid")
    try:
        cfg_text = str(data["config"])
        cfg = _config_from_exact(json.loads(cfg_text)) if cfg_text else None
        return SignalGrid(
            data["values"],
            data["t_axis"],
            data["tau_axis"],
            cfg,
            bool(data["sq_cancelled"]),
            json.loads(str(data["metadata"])),
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise FileFormatError(f"{path}: corrupt signal grid ({exc})") from exc


def write_signal_csv(path, grid):
    """Long format: t_ns, tau_ns, value."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_ns", "tau_ns", "value"])
        for j, t in enumerate(grid.t_axis):
            for k, tau in enumerate(grid.tau_axis):
                w.writerow([repr(float(t / NS)), repr(float(tau / NS)), repr(float(grid.values[j, k]))])


def read_signal_csv(path, config=None, sq_cancelled=True):
    try:
        raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise FileFormatError(f"{path}: {exc}") from exc
    t = np.unique(raw[:, 0])
    tau = np.unique(raw[:, 1])
    if raw.shape[0] != t.size * tau.size:
        raise FileFormatError(f"{path}: rows do not form a complete t x tau grid")
    values = np.empty((t.size, tau.size))
    values[np.searchsorted(t, raw[:, 0]), np.searchsorted(tau, raw[:, 1])] = raw[:, 2]
    return SignalGrid(values, t * NS, tau * NS, config, sq_cancelled)


# --------------------------------------------------------------------------
# spectral maps


def save_spectral_map(path, smap):
    with open(path, "wb") as fh:
        np.savez(
            fh,
            format_version=np.int64(FORMAT_VERSION),
            kind=np.str_("spectral_map"),
            values=smap.values,
            nu_axis=smap.nu_axis,
            omega_axis=smap.omega_axis,
            kernel=np.str_(smap.kernel),
            window=np.str_(WindowKind(smap.window).value),
        )


def load_spectral_map(path):
    data = _open_npz(path, "spectral_map")
    return SpectralMap(data["values"], data["nu_axis"], data["omega_axis"], str(data["kernel"]), str(data["window"]))


def write_spectral_csv(path, smap):
    """Long format in MHz: nu_mhz, omega_mhz, value (or value_re, value_im)."""
    complex_map = np.iscomplexobj(smap.values)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["nu_mhz", "omega_mhz"] + (["value_re", "value_im"] if complex_map else ["value"]))
        nu = rad_to_mhz(smap.nu_axis)
        om = rad_to_mhz(smap.omega_axis)
        for a in range(nu.size):
            for b in range(om.size):
                v = smap.values[a, b]
                vals = [repr(float(v.real)), repr(float(v.imag))] if complex_map else [repr(float(v))]
                w.writerow([repr(float(nu[a])), repr(float(om[b]))] + vals)


def read_spectral_csv(path, kernel="cos", window=WindowKind.BOXCAR):
    with open(path, newline="") as fh:
        header = next(csv.reader(fh))
    raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    nu, om = np.unique(raw[:, 0]), np.unique(raw[:, 1])
    ia, ib = np.searchsorted(nu, raw[:, 0]), np.searchsorted(om, raw[:, 1])
    if "value_im" in header:
        values = np.empty((nu.size, om.size), dtype=complex)
        values[ia, ib] = raw[:, 2] + 1j * raw[:, 3]
    else:
        values = np.empty((nu.size, om.size))
        values[ia, ib] = raw[:, 2]
    return SpectralMap(values, mhz_to_rad(nu), mhz_to_rad(om), kernel, window)


# --------------------------------------------------------------------------
# result tables


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_rows_csv(path, rows):
    """Rows are dicts sharing keys; the first row fixes the column order."""
    rows = list(rows)
    if not rows:
        raise ValueError("nothing to write")
    cols = list(rows[0])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            w.writerow([_fmt(r.get(c, "")) for c in cols])


def read_rows_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_sweep_csv(path, points):
    write_rows_csv(path, [p.row() for p in points])


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=_json_default, allow_nan=True)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"cannot serialize {type(o).__name__}")


# --------------------------------------------------------------------------
# manifests


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int = None
    code_version: str = ""
    wall_time_s: float = 0.0
    outputs: dict = field(default_factory=dict)  # file name -> sha256
    argv: list = field(default_factory=list)

    def add_output(self, path, name=None):
        self.outputs[name or str(path)] = sha256_file(path)

    def write(self, path):
        write_json(path, asdict(self))

    @classmethod
    def read(cls, path):
        with open(path) as fh:
            return cls(**json.load(fh))

