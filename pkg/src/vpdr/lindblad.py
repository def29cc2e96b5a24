"""Ensemble VPDR simulator.

Per NV orientation and frozen 14N projection m_I the spin-1 problem is
solved in the eigenbasis of the free Hamiltonian with a rotating-wave
approximation taken in that basis, Markovian dephasing in Lindblad form, and
propagators built once per time step and reused recursively over the
(t_j, tau_k) grid.

Basis conventions
-----------------
* Zeeman basis ordered m_s = (-1, 0, +1), so S_z = diag(-1, 0, 1).
* Eigenbasis columns are ordered to match (|-1>-like, |0>-like, |+1>-like).
* Density matrices are vectorized column-stacked: vec(A X B) = (B^T kron A) vec(X).
"""

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import permutations

import numpy as np
from scipy.linalg import expm

from . import frames
from .constants import GAMMA, HYPERFINE_A, VALIDITY_FIELD_T, ZFS

_S2 = np.sqrt(2.0)
SZ = np.diag([-1.0, 0.0, 1.0]).astype(complex)
_SP = np.zeros((3, 3), dtype=complex)
_SP[1, 0] = _SP[2, 1] = _S2
SX = (_SP + _SP.conj().T) / 2
SY = (_SP - _SP.conj().T) / 2j

IDX_MINUS, IDX_ZERO, IDX_PLUS = 0, 1, 2
DEFAULT_MAX_CELLS = 50_000_000


class EigenbasisError(RuntimeError):
    """The |0>-like eigenvector cannot be identified (field outside validity)."""


@dataclass(frozen=True)
class Grid:
    start: float
    step: float
    count: int

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("grid step must be strictly positive")
        if int(self.count) != self.count or self.count < 1:
            raise ValueError("grid count must be an integer >= 1")

    @property
    def axis(self):
        return self.start + self.step * np.arange(self.count)


@dataclass(frozen=True)
class VpdrConfig:
    """Everything needed to simulate one VPDR data set.

    Fields are SI (tesla, seconds) with angular frequencies in rad/s.  The MW
    field is given by its maximal Rabi frequency ``omega_max`` = gamma |B_MW|
    and a direction in crystal coordinates.
    """

    b_dc: np.ndarray
    omega_max: float
    mw_direction: np.ndarray
    t_grid: Grid
    tau_grid: Grid
    t2_star: float = 2e-6
    mw_frequency: float = None  # None -> resonant with the ZFS (delta = 0)
    phases: tuple = (0.0, np.pi)
    orientations: tuple = frames.LABELS
    m_i_values: tuple = (-1, 0, 1)
    zfs: float = ZFS
    hyperfine_a: float = HYPERFINE_A
    gamma: float = GAMMA

    def __post_init__(self):
        object.__setattr__(self, "b_dc", np.asarray(self.b_dc, dtype=float).reshape(3))
        d = np.asarray(self.mw_direction, dtype=float).reshape(3)
        object.__setattr__(self, "mw_direction", d / np.linalg.norm(d))
        if not self.t2_star > 0:
            raise ValueError("t2_star must be positive or inf")
        if self.omega_max < 0:
            raise ValueError("omega_max must be non-negative")
        for p in self.phases:
            if not (np.isclose(p, 0.0) or np.isclose(p, np.pi)):
                raise ValueError("phases must be a subset of {0, pi}")
        for lbl in self.orientations:
            if lbl not in frames.LABELS:
                raise ValueError(f"unknown orientation {lbl!r}")
        for m in self.m_i_values:
            if m not in (-1, 0, 1):
                raise ValueError("m_i_values must be a subset of {-1, 0, 1}")
        if not self.phases or not self.orientations or not self.m_i_values:
            raise ValueError("phases, orientations and m_i_values must be non-empty")

    @property
    def b_mw(self):
        """MW field amplitude vector in tesla."""
        return self.omega_max / self.gamma * self.mw_direction

    @property
    def nu_mw(self):
        return self.zfs if self.mw_frequency is None else self.mw_frequency

    @property
    def detuning(self):
        return self.nu_mw - self.zfs

    def with_(self, **kw):
        return replace(self, **kw)


@dataclass
class SignalGrid:
    values: np.ndarray  # [j, k] over (t_j, tau_k)
    t_axis: np.ndarray
    tau_axis: np.ndarray
    config: VpdrConfig = None
    sq_cancelled: bool = False
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.t_axis = np.asarray(self.t_axis, dtype=float)
        self.tau_axis = np.asarray(self.tau_axis, dtype=float)
        if self.values.shape != (self.t_axis.size, self.tau_axis.size):
            raise ValueError("values shape does not match axes")

    def __add__(self, other):
        return replace(self, values=self.values + other.values)


@dataclass(frozen=True)
class Eigenbasis:
    energies: np.ndarray  # rad/s, ordered (-1-like, 0-like, +1-like)
    vectors: np.ndarray  # columns in Zeeman coordinates, same order

    @property
    def transition(self):
        """Frequency difference between the +-1-like eigenstates (rad/s)."""
        return abs(self.energies[IDX_PLUS] - self.energies[IDX_MINUS])


def spin_vector_dot(v):
    """v . S for a real 3-vector."""
    return v[0] * SX + v[1] * SY + v[2] * SZ


def build_free_hamiltonian(b_local, m_i, zfs=ZFS, gamma=GAMMA, hyperfine_a=HYPERFINE_A):
    """Delta S_z^2 + gamma B.S + A m_I S_z in rad/s (NV-local coordinates).

    Only the secular (axial) hyperfine term is kept.
    """
    b_local = np.asarray(b_local, dtype=float)
    if np.linalg.norm(b_local) > VALIDITY_FIELD_T:
        warnings.warn("DC field above 10 mT: eigenbasis RWA and secular hyperfine may be inaccurate", stacklevel=2)
    return zfs * SZ @ SZ + gamma * spin_vector_dot(b_local) + hyperfine_a * m_i * SZ


def diagonalize(h0):
    """Eigen-decompose ``h0`` and order columns by Zeeman overlap."""
    w, v = np.linalg.eigh(h0)
    overlap = np.abs(v) ** 2  # [zeeman, eigen]
    best, best_score = None, -1.0
    # ties (e.g. strongly mixed +-1) fall back to eigenvalue order via permutation order
    for perm in permutations(range(3)):
        score = sum(overlap[z, perm[z]] for z in range(3))
        if score > best_score + 1e-12:
            best, best_score = perm, score
    w = w[list(best)]
    v = v[:, list(best)]
    if overlap[IDX_ZERO, best[IDX_ZERO]] < 0.9:
        raise EigenbasisError(
            f"|0>-like eigenvector overlap {overlap[IDX_ZERO, best[IDX_ZERO]]:.3f} < 0.9; field outside validity"
        )
    # deterministic gauge: the dominant Zeeman component of each column is real positive
    for k in range(3):
        z = int(np.argmax(np.abs(v[:, k])))
        v[:, k] *= np.exp(-1j * np.angle(v[z, k]))
    return Eigenbasis(w, v)


def build_rwa_hamiltonian(h0, b_mw_local, nu_mw, phase, gamma=GAMMA):
    """Constant 3x3 RWA Hamiltonian in the free-Hamiltonian eigenbasis.

    The MW coupling gamma B_MW.S cos(nu t + phase) is transformed into the
    eigenbasis; only the 0-like <-> +-1-like elements survive the RWA, each
    halved and carrying exp(-i phase) on the lower (+-1, 0) entries.
    """
    basis = diagonalize(h0)
    return rwa_from_basis(basis, b_mw_local, nu_mw, phase, gamma)


def rwa_from_basis(basis, b_mw_local, nu_mw, phase, gamma=GAMMA):
    h = np.diag(basis.energies - nu_mw * np.array([1.0, 0.0, 1.0])).astype(complex)
    if b_mw_local is None:
        return h
    drive = basis.vectors.conj().T @ (gamma * spin_vector_dot(np.asarray(b_mw_local, float))) @ basis.vectors
    ph = np.exp(-1j * phase)
    for k in (IDX_MINUS, IDX_PLUS):
        h[k, IDX_ZERO] = 0.5 * drive[k, IDX_ZERO] * ph
        h[IDX_ZERO, k] = np.conj(h[k, IDX_ZERO])
    return h


def dephasing_rate(t2_star):
    """Lindblad rate per jump operator; gives SQ decay 1/T2* and DQ decay 2/T2*."""
    return 0.0 if np.isinf(t2_star) else 2.0 / t2_star


def liouvillian(h, t2_star):
    """9x9 generator with vec(d rho/dt) = L vec(rho), column stacking.

    Jump operators are the projectors onto the +-1-like eigenstates.
    """
    eye = np.eye(3)
    L = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    rate = dephasing_rate(t2_star)
    if rate:
        for k in (IDX_MINUS, IDX_PLUS):
            c = np.zeros((3, 3), dtype=complex)
            c[k, k] = 1.0
            cdc = c.conj().T @ c
            L += rate * (np.kron(c.conj(), c) - 0.5 * np.kron(eye, cdc) - 0.5 * np.kron(cdc.T, eye))
    return L


def vec(rho):
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v):
    return np.asarray(v).reshape(3, 3, order="F")


@dataclass
class SpinState:
    rho: np.ndarray

    def check(self, herm_tol=1e-12, trace_tol=1e-10, psd_tol=1e-10):
        """Raise AssertionError if rho is not a valid density matrix."""
        r = self.rho
        assert np.max(np.abs(r - r.conj().T)) < herm_tol, "not Hermitian"
        assert abs(np.trace(r) - 1.0) < trace_tol, "trace != 1"
        assert np.min(np.linalg.eigvalsh((r + r.conj().T) / 2)) > -psd_tol, "not PSD"
        return True


def _powers_right(mat, v0, count):
    """[v0, M v0, M^2 v0, ...] as rows, by recursion."""
    out = np.empty((count, v0.size), dtype=complex)
    v = v0
    for j in range(count):
        out[j] = v
        v = mat @ v
    return out


def _powers_left(mat, w0, count):
    """[w0, w0 M, w0 M^2, ...] as rows, by recursion."""
    out = np.empty((count, w0.size), dtype=complex)
    w = w0
    for j in range(count):
        out[j] = w
        w = w @ mat
    return out


@dataclass
class _Species:
    label: str
    m_i: int
    basis: Eigenbasis
    b_mw_local: np.ndarray


def _species(config):
    out = []
    for lbl in config.orientations:
        o = frames.orientation(lbl)
        # local x follows the MW transverse projection
        rot = frames.rotation_for(o.axis, config.b_mw)
        b_local = rot @ config.b_dc
        b_mw_local = rot @ config.b_mw
        for m_i in config.m_i_values:
            h0 = build_free_hamiltonian(b_local, m_i, config.zfs, config.gamma, config.hyperfine_a)
            out.append(_Species(lbl, m_i, diagonalize(h0), b_mw_local))
    return out


def _simulate_species(sp, config):
    """P0(t_j, tau_k) for each requested phase, one species."""
    dt, dtau = config.t_grid.step, config.tau_grid.step
    nt, ntau = config.t_grid.count, config.tau_grid.count
    h_free = rwa_from_basis(sp.basis, None, config.nu_mw, 0.0, config.gamma)
    h1 = rwa_from_basis(sp.basis, sp.b_mw_local, config.nu_mw, 0.0, config.gamma)
    L1 = liouvillian(h1, config.t2_star)
    L0 = liouvillian(h_free, config.t2_star)  # diagonal in this basis

    rho0 = np.zeros((3, 3), dtype=complex)
    rho0[IDX_ZERO, IDX_ZERO] = 1.0
    v0 = vec(rho0)
    e0 = v0.copy()  # selects rho[0-like, 0-like]

    E1 = expm(L1 * dt)
    if config.t_grid.start:
        v0 = expm(L1 * config.t_grid.start) @ v0
    v = _powers_right(E1, v0, nt)

    lam = np.diag(L0)
    step = np.exp(lam * dtau)
    d = np.empty((ntau, 9), dtype=complex)
    d[0] = np.exp(lam * config.tau_grid.start)
    for k in range(1, ntau):
        d[k] = d[k - 1] * step

    out = {}
    for phase in config.phases:
        if np.isclose(phase, 0.0):
            L2 = L1
            E2 = E1
        else:
            L2 = liouvillian(rwa_from_basis(sp.basis, sp.b_mw_local, config.nu_mw, phase, config.gamma), config.t2_star)
            E2 = expm(L2 * dt)
        w0 = e0 if not config.t_grid.start else e0 @ expm(L2 * config.t_grid.start)
        w = _powers_left(E2, w0, nt)
        out[float(phase)] = ((w * v) @ d.T).real
    return out


def simulate_grid(config, threads=1, max_cells=DEFAULT_MAX_CELLS):
    """Ensemble signal on the (t, tau) grid, summed over the configured phases.

    Orientations and m_I values are averaged with equal weight.
    """
    cells = config.t_grid.count * config.tau_grid.count
    if cells > max_cells:
        raise MemoryError(f"grid of {cells} cells exceeds cap of {max_cells}; raise max_cells explicitly")
    species = _species(config)
    if threads and threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(lambda s: _simulate_species(s, config), species))
    else:
        results = [_simulate_species(s, config) for s in species]
    total = np.zeros((config.t_grid.count, config.tau_grid.count))
    # fixed summation order keeps the output independent of thread count
    for res in results:
        for phase in sorted(res):
            total += res[phase]
    total /= len(species)
    return SignalGrid(
        total,
        config.t_grid.axis,
        config.tau_grid.axis,
        config,
        sq_cancelled=len(config.phases) == 2,
    )


def exact_transitions(config):
    """{(label, m_I): |E_+1-like - E_-1-like|} in rad/s for the free Hamiltonian."""
    return {(sp.label, sp.m_i): sp.basis.transition for sp in _species(config)}


def exact_highest_line(config, label):
    """The largest of the three hyperfine transition frequencies of ``label``."""
    cfg = replace(config, orientations=(label,), m_i_values=(-1, 0, 1))
    return max(exact_transitions(cfg).values())
