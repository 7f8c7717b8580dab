"""Monte Carlo N-photon detection events.

Random numbers come from numpy's PCG64 bit generator. Stream ``i`` of a run
is seeded with ``SeedSequence(rng_seed, spawn_key=(i,))`` so output is
reproducible for a fixed ``(rng_seed, n_streams)`` on any platform.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .fringe import (
    ArrayGeometry,
    FringeConfig,
    SourceKind,
    SourceModel,
    _noon_tensor,
    check_enumeration,
    singles_distribution,
)
from .ocm import DetectionEvent, EventBatch

log = logging.getLogger(__name__)

RNG_ALGORITHM = "PCG64"

# stream indices reserved for calibration draws, disjoint from event streams
_CALIBRATION_STREAMS = {"laser": 2**32, "dc": 2**32 + 1, "background": 2**32 + 2, "classical": 2**32 + 3}


@dataclass(frozen=True)
class DetectorModel:
    efficiency: float = 1.0
    number_resolving: bool = True
    dark_rate: float = 0.0

    def __post_init__(self):
        if not 0 <= self.efficiency <= 1:
            raise ValueError(f"efficiency must lie in [0, 1], got {self.efficiency}")
        if self.dark_rate < 0:
            raise ValueError(f"dark_rate must be >= 0, got {self.dark_rate}")


@dataclass(frozen=True)
class SimRun:
    """One simulation request.

    Exactly one of ``n_events`` (generated N-photon events, one per pulse) or
    ``n_pulses`` (laser pulses, each emitting an event with probability
    ``emission_probability``) must be given.
    """

    source: SourceModel
    fringe: FringeConfig
    geometry: ArrayGeometry
    detector: DetectorModel = DetectorModel()
    n_events: Optional[int] = None
    n_pulses: Optional[int] = None
    rng_seed: int = 0
    emission_probability: float = 1.0
    n_streams: int = 1
    emit_partial: bool = False

    def __post_init__(self):
        if (self.n_events is None) == (self.n_pulses is None):
            raise ValueError("set exactly one of n_events / n_pulses")
        count = self.n_events if self.n_events is not None else self.n_pulses
        if count < 0:
            raise ValueError(f"event/pulse count must be non-negative, got {count}")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError("rng_seed must be a 64-bit unsigned integer")
        if not 0 < self.emission_probability <= 1:
            raise ValueError("emission_probability must lie in (0, 1]")
        if self.n_streams < 1:
            raise ValueError("n_streams must be >= 1")


@dataclass
class SimReport:
    generated: int = 0
    detected: int = 0
    dropped_same_pixel: int = 0
    dropped_inefficiency: int = 0
    dropped_excess: int = 0
    background_generated: int = 0
    n_pulses: int = 0
    accidental_pulses: float = 0.0
    rng_algorithm: str = RNG_ALGORITHM
    rng_seed: int = 0
    n_streams: int = 1

    @property
    def consistent(self):
        dropped = self.dropped_same_pixel + self.dropped_inefficiency + self.dropped_excess
        return self.generated == self.detected + dropped

    def add(self, other: "SimReport"):
        for name in (
            "generated",
            "detected",
            "dropped_same_pixel",
            "dropped_inefficiency",
            "dropped_excess",
            "background_generated",
            "n_pulses",
        ):
            setattr(self, name, getattr(self, name) + getattr(other, name))

    def to_text(self):
        return "".join(f"{k} = {v}\n" for k, v in asdict(self).items())

    @classmethod
    def from_text(cls, text):
        kinds = {k: type(v) for k, v in asdict(cls()).items()}
        values = {}
        for line in text.splitlines():
            if not line.strip() or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            key = key.strip()
            values[key] = kinds[key](value.strip())
        return cls(**values)


@dataclass
class SimResult:
    events: EventBatch
    report: SimReport
    partial: list = field(default_factory=list)


def stream_rng(seed, index):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def _draw_classical(rng, p1, m, n):
    cdf = np.cumsum(p1)
    cdf /= cdf[-1]
    idx = np.searchsorted(cdf, rng.random((m, n)), side="right")
    return np.minimum(idx, p1.size - 1)


def _draw_table(rng, cdf, m, d, n):
    flat = np.searchsorted(cdf, rng.random(m), side="right")
    flat = np.minimum(flat, cdf.size - 1)
    return np.stack(np.unravel_index(flat, (d,) * n), axis=1)


class _Sampler:
    def __init__(self, run: SimRun):
        src, n, d = run.source, run.source.photon_number, run.geometry.pixel_count
        self.run = run
        self.n, self.d = n, d
        self.p1 = singles_distribution(run.fringe, run.geometry)
        self.cdf = None
        if src.kind is not SourceKind.CLASSICAL and src.background_fraction < 1:
            check_enumeration(d, n)
            self.cdf = np.cumsum(_noon_tensor(run.fringe, run.geometry, n).ravel())
            self.cdf /= self.cdf[-1]

    def tuples(self, rng, m):
        """Ordered pixel tuples and a mask of background (accidental) rows."""
        src = self.run.source
        if src.kind is SourceKind.CLASSICAL:
            return _draw_classical(rng, self.p1, m, self.n), np.zeros(m, dtype=bool)
        if src.kind is SourceKind.IDEAL_NOON:
            return _draw_table(rng, self.cdf, m, self.d, self.n), np.zeros(m, dtype=bool)
        bg = rng.random(m) < src.background_fraction
        out = np.empty((m, self.n), dtype=np.int64)
        nbg = int(bg.sum())
        out[bg] = _draw_classical(rng, self.p1, nbg, self.n)
        if m - nbg:
            out[~bg] = _draw_table(rng, self.cdf, m - nbg, self.d, self.n)
        return out, bg

    def run_stream(self, index, pulse_lo, count):
        run, n, d = self.run, self.n, self.d
        det = run.detector
        rng = stream_rng(run.rng_seed, index)
        report = SimReport()
        if run.n_events is not None:
            pulse_ids = pulse_lo + np.arange(count, dtype=np.int64)
            report.n_pulses = count
        else:
            fires = rng.random(count) < run.emission_probability
            pulse_ids = pulse_lo + np.flatnonzero(fires).astype(np.int64)
            report.n_pulses = count
        m = pulse_ids.size
        report.generated = m
        tuples, bg = self.tuples(rng, m)
        report.background_generated = int(bg.sum())

        if det.efficiency < 1:
            seen = rng.random((m, n)) < det.efficiency
        else:
            seen = np.ones((m, n), dtype=bool)
        dark = rng.poisson(d * det.dark_rate, m) if det.dark_rate > 0 else np.zeros(m, dtype=np.int64)

        k = seen.sum(axis=1)
        total = k + dark
        clean = (k == n) & (dark == 0)
        # fast path: all photons seen, no dark clicks
        full = np.sort(tuples[clean], axis=1)
        if det.number_resolving:
            ok = np.ones(full.shape[0], dtype=bool)
        else:
            ok = ~np.any(full[:, 1:] == full[:, :-1], axis=1) if n > 1 else np.ones(full.shape[0], bool)
        keep_ids = [pulse_ids[clean][ok]]
        keep_pix = [full[ok]]
        report.detected += int(ok.sum())
        report.dropped_same_pixel += int((~ok).sum())

        partial = []
        slow = np.flatnonzero(~clean)
        extra_ids, extra_pix = [], []
        for row in slow:
            fired = tuples[row][seen[row]].tolist()
            if dark[row]:
                fired += rng.integers(0, d, size=int(dark[row])).tolist()
            fired.sort()
            tot = int(total[row])
            repeated = len(set(fired)) < len(fired)
            if tot < n:
                report.dropped_inefficiency += 1
                if run.emit_partial and fired:
                    pix = sorted(set(fired)) if not det.number_resolving else fired
                    partial.append(DetectionEvent(int(pulse_ids[row]), tuple(pix)))
            elif tot > n:
                report.dropped_excess += 1
            elif repeated and not det.number_resolving:
                report.dropped_same_pixel += 1
            else:
                report.detected += 1
                extra_ids.append(int(pulse_ids[row]))
                extra_pix.append(fired)
        if extra_ids:
            keep_ids.append(np.asarray(extra_ids, dtype=np.int64))
            keep_pix.append(np.asarray(extra_pix, dtype=np.int64).reshape(-1, n))
        ids = np.concatenate(keep_ids)
        pix = np.concatenate(keep_pix)
        order = np.argsort(ids, kind="stable")
        return EventBatch(ids[order], pix[order]), report, partial


def sample_events(run: SimRun) -> SimResult:
    """Draw events from the source law and pass them through the detector.

    An event survives as an N-photon event only if all N photons are
    detected (per-photon Bernoulli thinning), no dark click is added, and,
    for non-number-resolving detectors, no two photons share a pixel.
    """
    sampler = _Sampler(run)
    total = run.n_events if run.n_events is not None else run.n_pulses
    bounds = np.linspace(0, total, run.n_streams + 1).astype(np.int64)
    report = SimReport(rng_seed=run.rng_seed, n_streams=run.n_streams)
    batches, partial = [], []
    for i in range(run.n_streams):
        batch, rep, part = sampler.run_stream(i, int(bounds[i]), int(bounds[i + 1] - bounds[i]))
        batches.append(batch)
        partial.extend(part)
        report.add(rep)
    src = run.source
    if src.kind is SourceKind.MIXED:
        expected_bg = src.background_fraction * (
            total if run.n_events is not None else total * run.emission_probability
        )
        report.accidental_pulses = expected_bg / src.background_singles_rate**src.photon_number
    assert report.consistent, report
    log.debug("sampled %d/%d events", report.detected, report.generated)
    return SimResult(EventBatch.concatenate(batches), report, partial)


@dataclass
class SinglesCalibration:
    """Per-pixel singles counts from one constituent over ``exposure_pulses``."""

    constituent: str
    counts: np.ndarray
    expected: np.ndarray
    exposure_pulses: float

    @property
    def rates(self):
        if self.exposure_pulses == 0:
            return np.zeros_like(self.expected)
        return self.counts / self.exposure_pulses

    @property
    def rate_errors(self):
        if self.exposure_pulses == 0:
            return np.zeros_like(self.expected)
        return np.sqrt(self.counts) / self.exposure_pulses


def constituent_rates(run: SimRun, constituent):
    """Expected detected singles probability per pixel per pulse."""
    src = run.source
    p1 = singles_distribution(run.fringe, run.geometry)
    share = {
        (SourceKind.MIXED, "laser"): src.background_split,
        (SourceKind.MIXED, "dc"): 1 - src.background_split,
        (SourceKind.MIXED, "background"): 1.0,
        (SourceKind.CLASSICAL, "classical"): 1.0,
        (SourceKind.CLASSICAL, "laser"): 1.0,
    }.get((src.kind, constituent))
    if share is None:
        raise ValueError(f"a {src.kind.value} source has no '{constituent}' constituent")
    return run.detector.efficiency * src.background_singles_rate * share * p1 + run.detector.dark_rate


def sample_singles_calibration(run: SimRun, constituent, *, exposure_pulses=None, n_photons=None, seed=None):
    """Singles counts with one beam blocked.

    Give either ``exposure_pulses`` (Poisson counts per pixel) or
    ``n_photons`` (exactly that many photons split multinomially; the
    equivalent pulse exposure is inferred from the constituent's rate).
    """
    if (exposure_pulses is None) == (n_photons is None):
        raise ValueError("give exactly one of exposure_pulses / n_photons")
    rates = constituent_rates(run, constituent)
    rng = stream_rng(run.rng_seed if seed is None else seed, _CALIBRATION_STREAMS[constituent])
    if n_photons is not None:
        total_rate = rates.sum()
        exposure = n_photons / total_rate if n_photons else 0.0
        counts = rng.multinomial(int(n_photons), rates / total_rate).astype(np.float64)
    else:
        exposure = float(exposure_pulses)
        counts = rng.poisson(rates * exposure).astype(np.float64)
    return SinglesCalibration(constituent, counts, rates * exposure, exposure)
