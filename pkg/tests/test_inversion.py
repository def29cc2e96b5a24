import numpy as np
import pytest
from conftest import fig_config, known_rabi

from vpdr.constants import GAMMA, HYPERFINE_A, TWO_PI, transition_error_to_field
from vpdr.inversion import (
    DynamicRangeError,
    RabiOrderingError,
    RamseyFitModel,
    accuracy_sweep,
    check_dynamic_range,
    default_nu_axis,
    estimate_rabi,
    expected_rabi_order,
    fit_ramsey,
    invert,
    lorentzian_line,
    robustness_sweep,
    _status,
    seed_omega0,
)
from vpdr.lindblad import Grid, exact_highest_line, simulate_grid

TAU = np.arange(150) * 20e-9


def _model(**kw):
    base = dict(
        omega0=TWO_PI * 1.7e6,
        decay_time=1.5e-6,
        amplitudes=(0.3, 0.5, 0.4),
        phases=(0.1, -0.4, 1.0),
        offset=0.2,
    )
    base.update(kw)
    return RamseyFitModel(**base)


# ---------------------------------------------------------------- Ramsey fit


def test_model_frequencies_and_value():
    m = _model()
    w = m.frequencies()
    assert np.allclose(w, [2 * abs(m.omega0 + k * HYPERFINE_A) for k in (-1, 0, 1)])
    assert m.highest_line == pytest.approx(2 * (m.omega0 + HYPERFINE_A))
    assert m(0.0) == pytest.approx(0.2 + sum(a * np.cos(p) for a, p in zip(m.amplitudes, m.phases)))


def test_model_validation():
    with pytest.raises(ValueError):
        _model(decay_time=0.0)
    with pytest.raises(ValueError):
        _model(amplitudes=(1.0,))
    with pytest.raises(ValueError):
        _model(mode="quad")


def test_noiseless_fit_recovers_parameters():
    truth = _model()
    fit = fit_ramsey(truth(TAU), TAU)
    m = fit.model
    assert m.omega0 == pytest.approx(truth.omega0, rel=1e-9)
    assert m.decay_time == pytest.approx(truth.decay_time, rel=1e-9)
    assert np.allclose(m.amplitudes, truth.amplitudes, rtol=1e-9)
    assert np.allclose(m.phases, truth.phases, atol=1e-9)
    assert m.offset == pytest.approx(truth.offset, rel=1e-9)
    assert fit.omega_fit == pytest.approx(truth.highest_line, rel=1e-12)
    assert fit.converged and not fit.rank_deficient
    assert fit.residual_rms < 1e-8 * max(truth.amplitudes)


def test_noiseless_fit_with_offset_axis():
    truth = _model()
    tau = 0.3e-6 + TAU
    fit = fit_ramsey(truth(tau), tau)
    assert fit.model.omega0 == pytest.approx(truth.omega0, rel=1e-9)
    assert np.allclose(fit.model.phases, truth.phases, atol=1e-8)


def test_single_mode_is_one_sinusoid():
    truth = RamseyFitModel(TWO_PI * 2.2e6, 2e-6, (0.25,), (0.3,), 0.1, mode="single")
    fit = fit_ramsey(truth(TAU), TAU, mode="single")
    assert fit.model.omega0 == pytest.approx(truth.omega0, rel=1e-9)
    assert len(fit.model.amplitudes) == 1
    assert fit.omega_fit == pytest.approx(2 * truth.omega0, rel=1e-9)


def test_free_mode_recovers_independent_lines():
    lines = (TWO_PI * 2.1e6, TWO_PI * 5.9e6, TWO_PI * 9.6e6)
    truth = RamseyFitModel(0.0, 1.8e-6, (0.3, 0.2, 0.4), (0.0, 0.5, -0.5), 0.0, mode="free", line_frequencies=lines)
    init = RamseyFitModel(0.0, 1e-6, (1, 1, 1), (0, 0, 0), mode="free", line_frequencies=tuple(w * 1.01 for w in lines))
    fit = fit_ramsey(truth(TAU), TAU, mode="free", initial=init)
    assert np.allclose(sorted(fit.model.line_frequencies), lines, rtol=1e-9)
    assert fit.omega_fit == pytest.approx(max(lines), rel=1e-9)


def test_seed_lands_near_truth():
    truth = _model(omega0=TWO_PI * 3.3e6)
    w0 = seed_omega0(truth(TAU), TAU, 1e-6)
    assert abs(w0 - truth.omega0) < HYPERFINE_A / 2


def test_fit_with_initial_guess():
    truth = _model()
    init = _model(omega0=truth.omega0 + 0.3 * HYPERFINE_A, decay_time=1e-6)
    fit = fit_ramsey(truth(TAU), TAU, initial=init)
    assert fit.model.omega0 == pytest.approx(truth.omega0, rel=1e-9)
    with pytest.raises(ValueError):
        fit_ramsey(truth(TAU), TAU, initial=init, mode="single")


def test_fit_input_validation():
    with pytest.raises(ValueError, match="points"):
        fit_ramsey(np.zeros(10), TAU[:10])
    bad = _model()(TAU)
    bad[3] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        fit_ramsey(bad, TAU)
    with pytest.raises(ValueError):
        fit_ramsey(bad, TAU, mode="double")


def test_dead_zone_fit_is_flagged():
    # omega0 ~ 0: the three lines collapse onto 2A and omega0 is undetermined
    truth = _model(omega0=0.0)
    fit = fit_ramsey(truth(TAU), TAU)
    assert fit.rank_deficient
    assert "dead_zone" in _status(fit, 2e-6)
    # small but nonzero omega0 is still resolved, yet flagged as inside the dead zone
    near = fit_ramsey(_model(omega0=TWO_PI * 2e3)(TAU), TAU)
    assert near.model.omega0 == pytest.approx(TWO_PI * 2e3, rel=1e-6)
    assert _status(near, 2e-6) == "dead_zone"


def test_delta_b_wiring():
    assert transition_error_to_field(TWO_PI * 20.0) * 1e9 == pytest.approx(0.3568, abs=5e-4)
    assert GAMMA / TWO_PI == pytest.approx(28.024e9)


# ---------------------------------------------------------------- Rabi estimation


def test_estimate_rabi_quadratic_refinement():
    nu = np.arange(0, 100, 1.0)
    centres = [20.3, 41.7, 60.2, 79.9]
    spec = sum(np.exp(-0.5 * ((nu - c) / 2.0) ** 2) for c in centres)
    est = estimate_rabi(spec, nu, ("a", "b", "c", "d"))
    assert est.complete
    for lbl, c in zip("abcd", centres):
        assert abs(est.omega[lbl] - c) < 0.1


def test_estimate_rabi_partial():
    nu = np.arange(0, 100, 1.0)
    spec = np.exp(-0.5 * ((nu - 30) / 2.0) ** 2) + np.exp(-0.5 * ((nu - 60) / 2.0) ** 2)
    est = estimate_rabi(spec, nu, ("a", "b", "c", "d"))
    assert not est.complete
    assert all(np.isnan(v) for v in est.omega.values())
    assert "expected 4" in est.message


def test_estimate_rabi_within_grid_step(fig4_signal, fig4_config):
    nu = default_nu_axis(fig4_signal, step=TWO_PI * 0.25e6)
    from vpdr.spectral import rabi_spectrum

    est = estimate_rabi(rabi_spectrum(fig4_signal, nu), nu, expected_rabi_order(fig4_config))
    assert est.complete
    from vpdr.lindblad import exact_transitions

    tr = exact_transitions(fig4_config)
    for lbl, om in known_rabi(fig4_config).items():
        eff = np.mean([np.hypot(om, tr[(lbl, m)]) for m in (-1, 0, 1)])
        assert abs(est.omega[lbl] - eff) < TWO_PI * 0.25e6


def test_symmetric_mw_direction_raises_ordering_error():
    cfg = fig_config(mw_direction=(0.0, 0.0, 1.0))
    with pytest.raises(RabiOrderingError, match="drift tolerance"):
        expected_rabi_order(cfg)


def test_expected_order_ascending(fig4_config):
    order = expected_rabi_order(fig4_config)
    rabi = known_rabi(fig4_config)
    assert [rabi[lbl] for lbl in order] == sorted(rabi.values())


# ---------------------------------------------------------------- end to end


def test_invert_requires_sq_cancelled(fig4_config):
    cfg = fig4_config.with_(phases=(0.0,), t_grid=Grid(0.0, 2.5e-9, 40))
    with pytest.raises(ValueError, match="SQ"):
        invert(simulate_grid(cfg), cfg)


def test_invert_known_rabi_subnanotesla(fig4_signal, fig4_config):
    rep = invert(fig4_signal, fig4_config, known_rabi=known_rabi(fig4_config))
    for r in rep.results:
        assert abs(r.delta_b) < 1e-9
        assert r.omega_exact == exact_highest_line(fig4_config, r.label)
        assert r.delta_b == pytest.approx((r.omega_fit - r.omega_exact) / (2 * GAMMA))
        assert r.status == "ok"
    d = rep.to_dict()
    assert d["rabi_source"] == "known" and len(d["orientations"]) == 4


def test_invert_known_rabi_as_sequence(fig4_signal, fig4_config):
    kr = known_rabi(fig4_config)
    a = invert(fig4_signal, fig4_config, known_rabi=kr)
    b = invert(fig4_signal, fig4_config, known_rabi=[kr[k] for k in ("111", "-111", "1-11", "11-1")])
    assert [r.omega_fit for r in a.results] == [r.omega_fit for r in b.results]


def test_crosstalk_removal(fig4_signal, fig4_config):
    """Dropping the other orientations removes most of the error."""
    full = invert(fig4_signal, fig4_config, known_rabi=known_rabi(fig4_config)).by_label()
    for lbl in fig4_config.orientations:
        cfg = fig4_config.with_(orientations=(lbl,))
        alone = invert(simulate_grid(cfg), cfg, known_rabi=known_rabi(fig4_config)).results[0]
        assert abs(alone.delta_b) < abs(full[lbl].delta_b) / 10


@pytest.fixture(scope="module")
def isolated(fig4_config):
    out = {}
    for lbl in fig4_config.orientations:
        cfg = fig4_config.with_(orientations=(lbl,))
        out[lbl] = (cfg, simulate_grid(cfg))
    return out


def test_self_calibrated_matches_known_without_crosstalk(isolated, fig4_config):
    for lbl, (cfg, sig) in isolated.items():
        k = invert(sig, cfg, known_rabi=known_rabi(fig4_config)).results[0]
        e = invert(sig, cfg, expected_order=(lbl,)).results[0]
        assert abs(e.omega_rabi_est / k.omega_rabi_est - 1) < 0.01
        assert abs(k.omega_fit - e.omega_fit) / TWO_PI < 1.0


def test_detuning_invariance_without_crosstalk(isolated, fig4_config):
    for lbl, (cfg, sig) in isolated.items():
        k = invert(sig, cfg, known_rabi=known_rabi(fig4_config)).results[0]
        cd = cfg.with_(mw_frequency=cfg.zfs + TWO_PI * 0.5e6)
        d = invert(simulate_grid(cd), cd, known_rabi=known_rabi(fig4_config)).results[0]
        assert abs(k.omega_fit - d.omega_fit) / TWO_PI < 1.0


@pytest.mark.xfail(strict=True, reason="with all four orientations the fit moves by up to ~30 Hz with the nu used, through crosstalk")
def test_self_calibrated_matches_known_ensemble(fig4_signal, fig4_config):
    k = invert(fig4_signal, fig4_config, known_rabi=known_rabi(fig4_config))
    e = invert(fig4_signal, fig4_config)
    assert max(abs(a.omega_fit - b.omega_fit) for a, b in zip(k.results, e.results)) / TWO_PI < 1.0


@pytest.mark.xfail(strict=True, reason="with all four orientations a 0.5 MHz detuning moves one line by ~1.8 Hz through crosstalk")
def test_detuning_invariance_ensemble(fig4_signal, fig4_config):
    cd = fig4_config.with_(mw_frequency=fig4_config.zfs + TWO_PI * 0.5e6)
    a = invert(fig4_signal, fig4_config, known_rabi=known_rabi(fig4_config))
    b = invert(simulate_grid(cd), cd, known_rabi=known_rabi(fig4_config))
    assert max(abs(x.omega_fit - y.omega_fit) for x, y in zip(a.results, b.results)) / TWO_PI < 1.0


def test_detuning_changes_little_in_ensemble(fig4_signal, fig4_config):
    cd = fig4_config.with_(mw_frequency=fig4_config.zfs + TWO_PI * 0.5e6)
    a = invert(fig4_signal, fig4_config, known_rabi=known_rabi(fig4_config))
    b = invert(simulate_grid(cd), cd, known_rabi=known_rabi(fig4_config))
    assert max(abs(x.omega_fit - y.omega_fit) for x, y in zip(a.results, b.results)) / TWO_PI < 5.0


def test_mw_amplitude_scaling_self_calibrated(fig6_config):
    base = fig6_config.with_(omega_max=TWO_PI * 70e6)
    order = expected_rabi_order(base)
    lo = invert(simulate_grid(base), base)
    hi_cfg = base.with_(omega_max=TWO_PI * 105e6)
    hi = invert(simulate_grid(hi_cfg), hi_cfg, expected_order=order)
    for a, b in zip(lo.results, hi.results):
        assert b.omega_rabi_est / a.omega_rabi_est == pytest.approx(1.5, rel=0.005)
        assert abs(b.delta_b) < 10e-9


def test_fit_modes_run(fig4_signal, fig4_config):
    kr = known_rabi(fig4_config)
    for mode in ("single", "free"):
        rep = invert(fig4_signal, fig4_config, known_rabi=kr, mode=mode)
        assert all(np.isfinite(r.omega_fit) for r in rep.results)


def test_missing_rabi_peaks_reported(fig4_signal, fig4_config):
    nu = TWO_PI * np.arange(40e6, 60e6, 0.25e6)
    rep = invert(fig4_signal, fig4_config, nu_axis=nu)
    assert all(r.status == "rabi_missing" for r in rep.results)
    assert rep.message


# ---------------------------------------------------------------- sweeps and guards


def test_dynamic_range_guard(fig4_config):
    check_dynamic_range(fig4_config, 350e-6)
    with pytest.raises(DynamicRangeError, match="Nyquist"):
        check_dynamic_range(fig4_config, 400e-6)
    with pytest.raises(DynamicRangeError):
        accuracy_sweep(fig4_config, [(30.0, 40.0)], 400e-6)


def test_single_direction_sweep(fig4_config):
    cfg = fig4_config.with_(t_grid=Grid(0.0, 2.5e-9, 160))
    pts = accuracy_sweep(cfg, [(60.0, 20.0)], 50e-6, known_rabi=known_rabi(cfg))
    assert len(pts) == 1 and not pts[0].error
    b = pts[0].report.results[0]
    assert np.isfinite(b.delta_b)
    row = pts[0].row()
    assert row["theta_deg"] == 60.0 and row["status"] == "ok"
    assert "dB_nT[111]" in row


def test_robustness_sweep_rows(fig4_config):
    cfg = fig4_config.with_(tau_grid=Grid(0.0, 20e-9, 60))
    pts = robustness_sweep(cfg, omega_max_values=[TWO_PI * 100e6, TWO_PI * 110e6])
    assert [p.params["omega_max_mhz"] for p in pts] == pytest.approx([100.0, 110.0])
    assert all(p.row()["status"] == "ok" for p in pts)
    with pytest.raises(ValueError):
        robustness_sweep(cfg)


def test_short_pulse_axis_cannot_order_rabi(fig4_config):
    # 40 pulse steps resolve only 10 MHz, less than the smallest Rabi gap
    with pytest.raises(RabiOrderingError):
        robustness_sweep(fig4_config.with_(t_grid=Grid(0.0, 2.5e-9, 40)), omega_max_values=[TWO_PI * 100e6])


def test_lorentzian_comparison_path():
    w = TWO_PI * 5.3e6
    tau = np.arange(600) * 20e-9
    trace = np.exp(-tau / 3e-6) * np.cos(w * tau)
    lf = lorentzian_line(trace, tau, w + TWO_PI * 0.05e6)
    assert lf.converged
    assert abs(lf.center - w) < TWO_PI * 0.05e6
