import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from vpdr.constants import TWO_PI
from vpdr.frames import LABELS, mw_direction_from_angles, rabi_frequencies
from vpdr.lindblad import Grid, VpdrConfig, simulate_grid

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[0][2:])):
        terminalreporter.write_line(line)


FIG_FIELD = (-38.4e-6, 25.7e-6, 19.1e-6)
MW_OPT = (13.74, 30.05)


def fig_config(t_count=160, **kw):
    """Field, MW and dephasing of the single-inversion example."""
    base = dict(
        b_dc=FIG_FIELD,
        omega_max=TWO_PI * 100e6,
        mw_direction=tuple(mw_direction_from_angles(*MW_OPT)),
        t_grid=Grid(0.0, 2.5e-9, t_count),
        tau_grid=Grid(0.0, 20e-9, 150),
        t2_star=2e-6,
    )
    base.update(kw)
    return VpdrConfig(**base)


def known_rabi(cfg):
    return dict(zip(LABELS, rabi_frequencies(cfg.b_mw, cfg.gamma)))


@pytest.fixture(scope="session")
def fig4_config():
    return fig_config()


@pytest.fixture(scope="session")
def fig4_signal(fig4_config):
    return simulate_grid(fig4_config)


@pytest.fixture(scope="session")
def fig6_config():
    return fig_config(t_count=320)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def axial_config(alpha, omega_l=TWO_PI * 1e6, t_grid=None, tau_grid=None, phases=(0.0,), t2_star=np.inf, label="111", m_i=0):
    """One orientation, field along its axis, MW perpendicular to it, so the
    analytic finite-alpha expressions apply exactly."""
    from vpdr.frames import orientation

    o = orientation(label)
    gamma = 2 * np.pi * 28.024e9
    b = omega_l / gamma * o.axis
    mw_dir = np.cross(o.axis, [1.0, 0.0, 0.0])
    return VpdrConfig(
        b_dc=b,
        omega_max=alpha * omega_l,
        mw_direction=mw_dir,
        t_grid=t_grid or Grid(0.0, 1e-9, 10),
        tau_grid=tau_grid or Grid(0.0, 1e-8, 10),
        t2_star=t2_star,
        phases=phases,
        orientations=(label,),
        m_i_values=(m_i,),
    )
