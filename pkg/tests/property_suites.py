"""Randomized invariant suites.

Run from the acceptance tests, which check the example counts and the
total runtime.  Each suite counts the examples it actually executed.
"""

import os
from collections import Counter

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from vpdr.constants import GAMMA, TWO_PI
from vpdr.frames import angles_from_direction, axis_matrix, mw_direction_from_angles, nv_axes, project_field, rabi_fractions, rabi_frequencies, rotation_for
from vpdr.lindblad import SignalGrid, SpinState, build_free_hamiltonian, diagonalize, liouvillian, rwa_from_basis, unvec, vec
from vpdr.sensitivity import window_means
from vpdr.spectral import f_trace, window_weights

EXAMPLES = int(os.environ.get("VPDR_PROPERTY_EXAMPLES", "10000"))
COUNTS = Counter()

many = settings(max_examples=EXAMPLES, deadline=None, derandomize=True, database=None)

finite = dict(allow_nan=False, allow_infinity=False)
vectors = st.lists(st.floats(-1.0, 1.0, **finite), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 1e-3)


@st.composite
def density_matrices(draw):
    """Random mixed state A A^dagger / tr, of random rank."""
    rng = np.random.default_rng(draw(st.integers(0, 2**63)))
    rank = draw(st.integers(1, 3))
    a = rng.normal(size=(3, rank)) + 1j * rng.normal(size=(3, rank))
    rho = a @ a.conj().T
    return rho / np.trace(rho).real


@many
@given(
    b=vectors,
    b_scale=st.floats(0.0, 5e-3),
    mw=vectors,
    omega=st.floats(0.0, TWO_PI * 200e6),
    detuning=st.floats(-TWO_PI * 20e6, TWO_PI * 20e6),
    phase=st.sampled_from([0.0, np.pi]),
    m_i=st.sampled_from([-1, 0, 1]),
    t2=st.one_of(st.just(np.inf), st.floats(1e-7, 1e-4)),
    dt=st.floats(0.0, 1e-6),
    rho0=density_matrices(),
)
def density_matrix_suite(b, b_scale, mw, omega, detuning, phase, m_i, t2, dt, rho0):
    COUNTS["density"] += 1
    b = b_scale * np.asarray(b) / np.linalg.norm(b)
    basis = diagonalize(build_free_hamiltonian(b, m_i))
    mw = np.asarray(mw) / np.linalg.norm(mw) * omega / GAMMA
    h = rwa_from_basis(basis, mw, basis.energies[2] - basis.energies[1] + detuning, phase)
    assert np.allclose(h, h.conj().T, atol=1e-6)
    L = liouvillian(h, t2)
    rho = unvec(expm(L * dt) @ vec(rho0))
    SpinState(rho).check(herm_tol=1e-9, trace_tol=1e-9, psd_tol=1e-9)


@st.composite
def signal_pairs(draw):
    n_t = draw(st.integers(4, 48))
    n_tau = draw(st.integers(1, 6))
    rng = np.random.default_rng(draw(st.integers(0, 2**63)))
    scale = draw(st.floats(1e-3, 10.0))
    return scale * rng.normal(size=(n_t, n_tau)), rng.uniform(-10, 10, size=(n_t, n_tau))


@many
@given(
    pair=signal_pairs(),
    a=st.floats(-5, 5, **finite),
    c=st.floats(-5, 5, **finite),
    frac=st.floats(0.01, 0.99),
    window=st.sampled_from(["boxcar", "blackman", "cosine"]),
    kernel=st.sampled_from(["cos", "exp"]),
)
def linearity_suite(pair, a, c, frac, window, kernel):
    COUNTS["linearity"] += 1
    x, y = pair
    dt = 2.5e-9
    t = np.arange(x.shape[0]) * dt
    tau = np.arange(x.shape[1]) * 20e-9
    nu = frac * np.pi / dt
    try:
        fx = f_trace(SignalGrid(x, t, tau), nu, window, kernel)
    except ValueError:
        assume(False)  # degenerate normalization for this (nu, window, N)
    fy = f_trace(SignalGrid(y, t, tau), nu, window, kernel)
    fz = f_trace(SignalGrid(a * x + c * y, t, tau), nu, window, kernel)
    scale = 1 + np.max(np.abs(a * fx)) + np.max(np.abs(c * fy))
    assert np.max(np.abs(fz - (a * fx + c * fy))) < 1e-9 * scale


@many
@given(
    kind=st.sampled_from(["boxcar", "blackman", "cosine"]),
    n=st.integers(2, 4096),
    sym=st.booleans(),
)
def window_suite(kind, n, sym):
    COUNTS["window"] += 1
    w = window_weights(kind, n, sym=sym)
    assert w.shape == (n,)
    assert np.all(w >= -1e-15) and np.all(w <= 1 + 1e-15)
    if kind == "boxcar":
        assert np.all(w == 1.0)
        return
    assert abs(w[0]) < 1e-15
    if kind == "cosine" or sym:
        assert np.allclose(w, w[::-1], atol=1e-15)
        assert abs(w[-1]) < 1e-15
    else:
        # periodic Blackman: w[k] = w[N-k], and full-period sums are exact
        assert np.allclose(w[1:], w[1:][::-1], atol=1e-15)
        m1, m2 = window_means("blackman")
        if n >= 3:
            assert abs(w.mean() - m1) < 1e-13
        if n >= 5:
            assert abs(np.mean(w**2) - m2) < 1e-13


@many
@given(b=vectors, scale=st.floats(1e-9, 1e-2), hint=vectors, theta=st.floats(0, 180), phi=st.floats(-179.9, 179.9))
def frame_suite(b, scale, hint, theta, phi):
    COUNTS["frames"] += 1
    b = scale * np.asarray(b)
    bb = b @ b
    z = axis_matrix()
    # the four tetrahedral axes form a tight frame
    assert abs(np.sum((z @ b) ** 2) - 4 / 3 * bb) < 1e-12 * bb
    om = rabi_frequencies(b)
    assert abs(np.sum(om**2) - 8 / 3 * GAMMA**2 * bb) < 1e-10 * GAMMA**2 * bb
    assert np.allclose(rabi_fractions(b), om / (GAMMA * np.sqrt(bb)), atol=1e-12)
    for o in nv_axes():
        d = project_field(b, o)
        assert abs(d.b_axial**2 + d.b_perp**2 - bb) < 1e-12 * bb
        r = rotation_for(o.axis, hint)
        assert np.allclose(r @ r.T, np.eye(3), atol=1e-12)
        assert abs(np.linalg.det(r) - 1) < 1e-12
        assert np.allclose(r[2], o.axis, atol=1e-15)
        loc = o.local(b, hint)
        assert abs(loc[2] - d.b_axial) < 1e-12 * np.sqrt(bb)
    v = mw_direction_from_angles(theta, phi)
    assert abs(np.linalg.norm(v) - 1) < 1e-15
    th, ph = angles_from_direction(v)
    assert np.allclose(mw_direction_from_angles(th, ph), v, atol=1e-14)
    if np.sin(np.radians(theta)) > 1e-3:
        assert abs(th - theta) < 1e-9 and abs(ph - phi) < 1e-9


SUITES = {
    "density-matrix invariants": ("density", density_matrix_suite),
    "inner-product linearity": ("linearity", linearity_suite),
    "window values": ("window", window_suite),
    "frame geometry": ("frames", frame_suite),
}
