"""Acceptance criteria, one test per criterion.

Every test records a single ``PASS``/``FAIL`` line (printed in the pytest
terminal summary, or directly when this file is run as a script). Tolerances
are fixed here and must not be tuned after the fact.
"""

import math
import sys
import time

import numpy as np
import pytest

from conftest import D, PITCH, fig_fringe, self_convolve
from noon_ocm import ArrayGeometry, CentroidHistogram, FringeConfig, SourceModel
from noon_ocm.analysis import estimate_accidentals, singles_frequency, subtract_accidentals
from noon_ocm.coincidence import PulseRecord, brute_force_counts, extract_coincidences
from noon_ocm.fit import envelope_sinusoid, fit_fringe
from noon_ocm.fringe import _outer
from noon_ocm.ocm import absorber_select, project_distribution, project_events
from noon_ocm.sim import DetectorModel, SimRun, sample_events, sample_singles_calibration

N_EVENTS = 10**6
SIGMAS = 3.0
PERIOD_RTOL = 0.01
ORACLE_ATOL = 1e-12
RUNTIME_LIMIT_S = 60.0
CALIBRATION_PHOTONS = 10**7
EPSILON = 0.4
COVERAGE_MIN = 0.99

RESULTS = []


def record(criterion, ok, detail):
    line = f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} | {detail}"
    RESULTS.append(line)
    print(line)
    return ok


GEOM = ArrayGeometry(D, PITCH, 0.0)


def simulate(kind, n, seed, fringe=None, detector=DetectorModel(), **src):
    run = SimRun(SourceModel(kind, n, **src), fringe or fig_fringe(), GEOM, detector, n_events=N_EVENTS, rng_seed=seed)
    return run, sample_events(run)


def histogram(res, n):
    return project_events(res.events, n, D, pitch=PITCH)


@pytest.fixture(scope="module")
def singles_k():
    _, res = simulate("classical", 1, seed=100)
    k1, _ = singles_frequency(histogram(res, 1))
    return k1


def test_criterion_1_classical_scaling(singles_k):
    t0 = time.perf_counter()
    rows, ok = [], True
    for n in range(1, 5):
        _, res = simulate("classical", n, seed=10 + n)
        h = histogram(res, n)
        fit = fit_fringe(h) if n == 1 else fit_fringe(h, k_constraint=n * singles_k)
        target = 1 / 2 ** (n - 1)
        good = abs(fit.raw_visibility - target) <= SIGMAS * fit.visibility_sigma
        ok &= good
        rows.append(f"N={n} V={fit.raw_visibility:.4f}±{fit.visibility_sigma:.4f} (target {target})")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < RUNTIME_LIMIT_S
    assert record(1, ok, "; ".join(rows) + f"; runtime {elapsed:.1f}s < {RUNTIME_LIMIT_S:.0f}s")


def test_criterion_2_noon_constancy(singles_k):
    fits, ok, rows = {}, True, []
    for n in range(2, 5):
        _, res = simulate("noon", n, seed=20 + n)
        fit = fit_fringe(histogram(res, n), k_constraint=n * singles_k)
        fits[n] = fit
        good = abs(fit.raw_visibility - 1.0) <= SIGMAS * fit.visibility_sigma
        ok &= good
        rows.append(f"N={n} V={fit.raw_visibility:.4f}±{fit.visibility_sigma:.4f}")
    vals = {n: f.raw_visibility for n, f in fits.items()}
    hi, lo = max(vals, key=vals.get), min(vals, key=vals.get)
    spread = vals[hi] - vals[lo]
    bound = SIGMAS * math.hypot(fits[hi].visibility_sigma, fits[lo].visibility_sigma)
    ok &= spread < bound
    assert record(2, ok, "; ".join(rows) + f"; spread {spread:.4f} < {bound:.4f}")


def test_criterion_3_super_resolution_period():
    cfg = fig_fringe()
    ok, rows = True, []
    for n in range(2, 5):
        _, res = simulate("noon", n, seed=30 + n)
        fit = fit_fringe(histogram(res, n), k_guess=n * cfg.frequency * 1.02)
        expected = cfg.period / n
        rel = abs(fit.period - expected) / expected
        ok &= rel < PERIOD_RTOL
        rows.append(f"N={n} period={fit.period * 1e6:.2f}um expected {expected * 1e6:.2f}um rel {rel:.2e}")
    assert record(3, ok, "; ".join(rows))


def test_criterion_4_convolution_oracle():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(20):
        p1 = rng.random(D)
        p1 /= p1.sum()
        for n in range(1, 5):
            got = project_distribution(_outer([p1] * n), n, D).counts
            worst = max(worst, float(np.max(np.abs(got - self_convolve(p1, n)))))
    assert record(4, worst <= ORACLE_ATOL, f"20 random singles laws x N=1..4, max |diff| {worst:.2e} <= {ORACLE_ATOL}")


def test_criterion_5_absorber_inefficiency():
    flat = FringeConfig.from_period(3 * PITCH, singles_visibility=0.0)
    ok, rows = True, []
    for n in range(2, 5):
        _, res = simulate("classical", n, seed=50 + n, fringe=flat)
        m = len(res.events)
        _, eff = absorber_select(res.events, n)
        target = D ** (1 - n)
        sigma = math.sqrt(target * (1 - target) / m)
        retained = histogram(res, n).total / res.report.detected
        good = abs(eff - target) <= SIGMAS * sigma and retained == 1.0
        ok &= good
        rows.append(f"N={n} eff={eff:.3e} target {target:.3e}±{sigma:.1e} OCM retention {retained:.0%}")
    assert record(5, ok, "; ".join(rows))


def test_criterion_6_accidental_subtraction(singles_k):
    ok, rows = True, []
    for n in range(2, 5):
        run, res = simulate("mixed", n, seed=60 + n, background_fraction=EPSILON)
        raw = histogram(res, n)
        cal_a = sample_singles_calibration(run, "laser", n_photons=CALIBRATION_PHOTONS)
        cal_b = sample_singles_calibration(run, "dc", n_photons=CALIBRATION_PHOTONS)
        acc = estimate_accidentals(cal_a, cal_b, n, res.report.accidental_pulses, number_resolving=True, pitch=PITCH)
        corrected = subtract_accidentals(raw, acc)
        k = n * singles_k
        fit_raw = fit_fringe(raw, k_constraint=k)
        fit_cor = fit_fringe(corrected, k_constraint=k)
        raw_target = (1 - EPSILON) + EPSILON / 2 ** (n - 1)
        good = (
            abs(fit_raw.raw_visibility - raw_target) <= SIGMAS * fit_raw.visibility_sigma
            and abs(fit_cor.raw_visibility - 1.0) <= SIGMAS * fit_cor.visibility_sigma
        )
        ok &= good
        rows.append(
            f"N={n} raw {fit_raw.raw_visibility:.4f}±{fit_raw.visibility_sigma:.4f} (target {raw_target:.4f}) "
            f"corrected {fit_cor.raw_visibility:.4f}±{fit_cor.visibility_sigma:.4f}"
        )
    assert record(6, ok, "; ".join(rows))


def test_criterion_7_coincidence_counter():
    rng = np.random.default_rng(7)
    fired = rng.random((10**5, D)) < 0.1
    records = [PulseRecord(i, tuple(np.flatnonzero(row).tolist())) for i, row in enumerate(fired)]
    ok, rows = True, []
    for k in range(1, 6):
        _, counter = extract_coincidences(records, D, k, batch_size=4096)
        counts, kfold, singles = brute_force_counts(records, D, k)
        good = dict(counter.table()) == counts and counter.kfold.tolist() == kfold and counter.singles.tolist() == singles
        ok &= good
        rows.append(f"k={k} {int(counter.subset_counts.sum())} events {'match' if good else 'MISMATCH'}")
    assert record(7, ok, "; ".join(rows))


def test_criterion_8_effective_pixels():
    h = CentroidHistogram(4, D, np.zeros(4 * (D - 1) + 1), pitch=PITCH)
    x = h.centroids / PITCH
    spacing = np.diff(h.centroids)
    ok = h.n_bins == 41 and x[0] == 0 and abs(x[-1] - 10) < 1e-12 and np.allclose(spacing, PITCH / 4, rtol=1e-12, atol=0)
    assert record(8, ok, f"{h.n_bins} bins spanning {x[0]:g}..{x[-1]:g} pixels, spacing pitch/{PITCH / spacing[0]:.3f}")


def test_criterion_9_fit_uncertainty_coverage():
    rng = np.random.default_rng(9)
    n, trials, v_true = 2, 1000, 0.5
    k = 2 * math.pi / (1.5 * PITCH)
    base = CentroidHistogram(n, D, np.zeros(n * (D - 1) + 1), pitch=PITCH)
    model = envelope_sinusoid(base.centroids, 1500.0, 5 * PITCH, 1.8 * PITCH, v_true, 0.3, k)
    inside = 0
    for _ in range(trials):
        counts = rng.poisson(model).astype(float)
        fit = fit_fringe(CentroidHistogram(n, D, counts, pitch=PITCH), k_constraint=k)
        inside += abs(fit.raw_visibility - v_true) <= SIGMAS * fit.visibility_sigma
    coverage = inside / trials
    assert record(9, coverage >= COVERAGE_MIN, f"{inside}/{trials} fits cover V within 3 sigma ({coverage:.1%} >= {COVERAGE_MIN:.0%})")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
