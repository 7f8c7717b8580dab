import numpy as np
import pytest

from conftest import PITCH, fig_fringe
from noon_ocm import ArrayGeometry, FringeConfig, SourceModel
from noon_ocm.coincidence import events_to_pulses, fold_statistics
from noon_ocm.fit import fit_fringe
from noon_ocm.fringe import joint_distribution, singles_distribution
from noon_ocm.ocm import project_distribution, project_events
from noon_ocm.sim import (
    DetectorModel,
    SimReport,
    SimRun,
    constituent_rates,
    sample_events,
    sample_singles_calibration,
)


def _run(kind="classical", n=2, d=11, fringe=None, **kw):
    geom = ArrayGeometry(d, PITCH, 0.0)
    return SimRun(SourceModel(kind, n, **kw.pop("src", {})), fringe or fig_fringe(), geom, **kw)


def test_same_pixel_fraction_two_pixels():
    flat = FringeConfig.from_period(5 * PITCH, singles_visibility=0.0)
    res = sample_events(_run(d=2, fringe=flat, n_events=10**6, rng_seed=11))
    same = np.mean(res.events.pixels[:, 0] == res.events.pixels[:, 1])
    # oracle: diagonal mass of the analytic tensor
    P = joint_distribution(SourceModel("classical", 2), flat, ArrayGeometry(2, PITCH, 0.0))
    assert np.trace(P) == pytest.approx(0.5)
    assert abs(same - 0.5) < 0.0015


def test_zero_efficiency_drops_everything():
    res = sample_events(_run(n_events=1000, detector=DetectorModel(efficiency=0.0)))
    assert len(res.events) == 0
    assert res.report.dropped_inefficiency == 1000 == res.report.generated


def test_fixed_seed_deterministic():
    a = sample_events(_run("noon", 3, n_events=20000, rng_seed=5, n_streams=3))
    b = sample_events(_run("noon", 3, n_events=20000, rng_seed=5, n_streams=3))
    c = sample_events(_run("noon", 3, n_events=20000, rng_seed=6, n_streams=3))
    np.testing.assert_array_equal(a.events.pixels, b.events.pixels)
    np.testing.assert_array_equal(a.events.pulse_ids, b.events.pulse_ids)
    assert not np.array_equal(a.events.pixels, c.events.pixels)
    assert a.report == b.report


def test_report_text_roundtrip():
    rep = sample_events(_run("mixed", 2, n_events=5000, src={"background_fraction": 0.3})).report
    back = SimReport.from_text(rep.to_text())
    assert back == rep
    assert rep.rng_algorithm == "PCG64"


def test_singles_histogram_chi2(geom):
    cfg = fig_fringe(visibility=0.8, phase0=0.5)
    m = 10**6
    res = sample_events(_run(n=1, fringe=cfg, n_events=m, rng_seed=3))
    obs = project_events(res.events, 1, 11).counts
    expected = m * singles_distribution(cfg, geom)
    chi2 = np.sum((obs - expected) ** 2 / expected)
    assert chi2 / 10 < 2.5


@pytest.mark.parametrize("kind", ["classical", "noon"])
def test_pair_histogram_chi2(kind, geom):
    cfg = fig_fringe(visibility=0.9)
    m = 500_000
    res = sample_events(_run(kind, 2, fringe=cfg, n_events=m, rng_seed=21))
    obs = project_events(res.events, 2, 11).counts
    exp = project_distribution(joint_distribution(SourceModel(kind, 2), cfg, geom), 2, 11, total=m).counts
    ok = exp > 5
    chi2 = np.sum((obs[ok] - exp[ok]) ** 2 / exp[ok])
    assert chi2 / ok.sum() < 2.0


def test_non_resolving_never_repeats():
    res = sample_events(_run(n=3, n_events=50000, detector=DetectorModel(number_resolving=False)))
    pix = res.events.pixels
    assert not np.any(pix[:, 1:] == pix[:, :-1])
    assert res.report.dropped_same_pixel > 0
    assert res.report.consistent


def test_efficiency_thinning_rate():
    eta, n, m = 0.6, 3, 200_000
    res = sample_events(_run(n=n, n_events=m, detector=DetectorModel(efficiency=eta)))
    frac = len(res.events) / m
    assert abs(frac - eta**n) < 4 * np.sqrt(eta**n * (1 - eta**n) / m)


def test_partial_events_and_dark_counts():
    res = sample_events(
        _run(n=2, n_events=20000, emit_partial=True, detector=DetectorModel(efficiency=0.5, dark_rate=0.01))
    )
    r = res.report
    assert r.consistent and r.dropped_excess > 0
    assert len(res.partial) > 0 and all(len(e.pixels) == 1 for e in res.partial)


def test_pulse_mode_emission_probability():
    res = sample_events(_run(n_pulses=100_000, emission_probability=0.2, rng_seed=4))
    assert res.report.n_pulses == 100_000
    assert abs(res.report.generated - 20000) < 4 * np.sqrt(100_000 * 0.2 * 0.8)
    assert res.events.pulse_ids.max() < 100_000


@pytest.mark.parametrize("n", [2, 3, 4])
def test_mixed_visibility_law(n, geom):
    eps = 0.4
    cfg = fig_fringe()
    P = joint_distribution(SourceModel("mixed", n, background_fraction=eps), cfg, geom)
    pn = joint_distribution(SourceModel("noon", n), cfg, geom)
    pc = joint_distribution(SourceModel("classical", n), cfg, geom)
    np.testing.assert_allclose(P, (1 - eps) * pn + eps * pc, atol=1e-16)
    hist = project_distribution(P, n, 11, total=1e6, pitch=PITCH)
    fit = fit_fringe(hist, k_constraint=n * cfg.frequency)
    assert fit.visibility == pytest.approx((1 - eps) + eps / 2 ** (n - 1), abs=2e-3)


def test_mixed_background_bookkeeping():
    src = {"background_fraction": 0.25, "background_singles_rate": 0.02}
    res = sample_events(_run("mixed", 2, n_events=40000, src=src))
    assert res.report.accidental_pulses == pytest.approx(0.25 * 40000 / 0.02**2)
    assert abs(res.report.background_generated - 10000) < 4 * np.sqrt(40000 * 0.25 * 0.75)


def test_calibration_uniform_photons():
    flat = FringeConfig.from_period(5 * PITCH, singles_visibility=0.0)
    run = _run(n=1, fringe=flat, n_events=1)
    cal = sample_singles_calibration(run, "classical", n_photons=1_100_000)
    assert cal.counts.sum() == 1_100_000
    assert np.all(np.abs(cal.counts - 1e5) < 3 * np.sqrt(1e5) + 1)


def test_calibration_follows_singles(geom):
    cfg = FringeConfig.from_period(11 * PITCH / 2)
    run = _run("mixed", 2, fringe=cfg, n_events=1, src={"background_fraction": 0.5})
    exposure = 10**9
    cal = sample_singles_calibration(run, "laser", exposure_pulses=exposure)
    expected = singles_distribution(cfg, geom) * 0.01 * 0.5 * exposure
    np.testing.assert_allclose(cal.expected, expected, rtol=1e-12)
    assert np.all(np.abs(cal.counts - expected) < 5 * np.sqrt(expected) + 1)


def test_calibration_zero_exposure():
    run = _run("mixed", 2, n_events=1, src={"background_fraction": 0.5})
    cal = sample_singles_calibration(run, "dc", exposure_pulses=0)
    assert not cal.rates.any() and not cal.rate_errors.any()
    cal = sample_singles_calibration(run, "dc", n_photons=0)
    assert not cal.rates.any()


def test_calibration_errors():
    run = _run(n_events=1)
    with pytest.raises(ValueError):
        sample_singles_calibration(run, "laser", exposure_pulses=1, n_photons=1)
    with pytest.raises(ValueError):
        constituent_rates(_run("noon", 2, n_events=1), "laser")


def test_fold_statistics_roundtrip():
    res = sample_events(_run(n=3, n_events=30000, detector=DetectorModel(efficiency=0.8, number_resolving=False), emit_partial=True))
    stats = fold_statistics(events_to_pulses(res.events, res.partial), 11)
    assert stats.kfold[3] == len(res.events)


@pytest.mark.parametrize(
    "kw",
    [
        {},
        {"n_events": 1, "n_pulses": 1},
        {"n_events": -1},
        {"n_events": 1, "emission_probability": 0.0},
        {"n_events": 1, "n_streams": 0},
    ],
)
def test_simrun_validation(kw):
    with pytest.raises(ValueError):
        _run(**kw)
