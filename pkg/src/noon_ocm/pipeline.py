"""simulate -> project -> fit -> report, writing every number as delimited text."""

from __future__ import annotations

import logging
import shutil
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import io
from .analysis import (
    PointKind,
    VisibilityPoint,
    estimate_accidentals,
    scaling_table,
    singles_frequency,
    subtract_accidentals,
)
from .config import ExperimentConfig, RunSpec
from .fit import envelope_sinusoid, fit_fringe
from .fringe import SourceKind, SourceModel, joint_distribution
from .ocm import joint_map_2d, project_events
from .sim import SimRun, sample_events, sample_singles_calibration

log = logging.getLogger(__name__)

INCOMPLETE_MARKER = "INCOMPLETE"
CURVE_POINTS = 400


class PipelineError(RuntimeError):
    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RunOutput:
    name: str
    source: SourceModel
    histogram: object
    fit: object = None
    corrected: object = None
    corrected_fit: object = None
    report: object = None


@dataclass
class Bundle:
    directory: Path
    runs: dict = field(default_factory=dict)
    scaling: object = None
    singles_k: float = None


class _Stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        log.info("stage %s", self.name)
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, PipelineError):
            raise PipelineError(self.name, exc) from exc
        return False


def _sim_run(cfg: ExperimentConfig, spec: RunSpec) -> SimRun:
    s = spec.simulation
    return SimRun(
        source=spec.source,
        fringe=spec.fringe,
        geometry=cfg.geometry,
        detector=spec.detector,
        n_events=s.get("n_events"),
        n_pulses=s.get("n_pulses"),
        rng_seed=s["rng_seed"],
        n_streams=s["n_streams"],
        emission_probability=s["emission_probability"],
        emit_partial=s["emit_partial"],
    )


def _write_fit(run_dir, stem, hist, fit):
    (run_dir / f"{stem}.txt").write_text(fit.to_text())
    x = np.linspace(hist.centroids[0], hist.centroids[-1], CURVE_POINTS)
    io.write_series(run_dir / f"{stem}_curve.tsv", ("centroid", "model"), x, envelope_sinusoid(x, **fit.params))


def _singles_k(cfg, bundle):
    """Singles spatial frequency from an unconstrained fit to an N=1 histogram."""
    for out in bundle.runs.values():
        if out.source.photon_number == 1 and out.fit is not None:
            return abs(out.fit.params["frequency"])
    base = cfg.runs[0]
    spec = RunSpec(
        "singles_calibration",
        SourceModel(SourceKind.CLASSICAL, 1),
        base.fringe,
        base.detector,
        {**base.simulation, "n_events": 1_000_000, "n_pulses": None, "rng_seed": base.simulation["rng_seed"] + 1},
    )
    res = sample_events(_sim_run(cfg, spec))
    g = cfg.geometry
    hist = project_events(res.events, 1, g.pixel_count, pitch=g.pitch, origin=g.origin)
    k, _ = singles_frequency(hist)
    return k


def run_pipeline(cfg: ExperimentConfig) -> Bundle:
    """Run every configured simulation and analysis into ``cfg.output_dir``.

    On failure the directory keeps whatever was written plus an
    ``INCOMPLETE`` file naming the failed stage, and :class:`PipelineError`
    is raised.
    """
    outdir = cfg.output_dir
    if outdir.exists():
        shutil.rmtree(outdir)
    outdir.mkdir(parents=True)
    (outdir / INCOMPLETE_MARKER).write_text("running\n")
    bundle = Bundle(outdir)
    try:
        _run(cfg, bundle)
    except PipelineError as exc:
        (outdir / INCOMPLETE_MARKER).write_text(f"stage = {exc.stage}\nerror = {exc.cause}\n")
        raise
    (outdir / INCOMPLETE_MARKER).unlink()
    return bundle


def _run(cfg: ExperimentConfig, bundle: Bundle):
    outdir = bundle.directory
    g = cfg.geometry
    with _Stage("config"):
        (outdir / "config.yaml").write_text(yaml.safe_dump(cfg.raw, sort_keys=True))

    sims = {}
    for spec in cfg.runs:
        run_dir = outdir / "runs" / spec.name
        run_dir.mkdir(parents=True)
        with _Stage(f"simulate:{spec.name}"):
            run = _sim_run(cfg, spec)
            res = sample_events(run)
            sims[spec.name] = (run, res)
            (run_dir / "report.txt").write_text(res.report.to_text())
            if cfg.output["write_events"]:
                io.write_events(run_dir / "events.tsv", res.events, res.partial)
        with _Stage(f"project:{spec.name}"):
            n = spec.source.photon_number
            hist = project_events(res.events, n, g.pixel_count, pitch=g.pitch, origin=g.origin)
            io.write_histogram(run_dir / "histogram.tsv", hist)
            bundle.runs[spec.name] = RunOutput(spec.name, spec.source, hist, report=res.report)

    mode = cfg.analysis["k_constraint"]
    singles = [s for s in cfg.runs if s.source.photon_number == 1]
    for spec in singles:
        with _Stage(f"fit:{spec.name}"):
            out = bundle.runs[spec.name]
            out.fit = fit_fringe(out.histogram, k_guess=spec.fringe.frequency)
            _write_fit(outdir / "runs" / spec.name, "fit", out.histogram, out.fit)

    with _Stage("singles-frequency"):
        if mode == "from-singles-fit":
            bundle.singles_k = _singles_k(cfg, bundle)
        elif mode == "explicit":
            bundle.singles_k = cfg.analysis["k_value_per_mm"] * 1e3
        if bundle.singles_k is not None:
            (outdir / "singles_frequency.txt").write_text(
                f"k1_per_m = {bundle.singles_k!r}\nperiod_m = {2 * np.pi / bundle.singles_k!r}\nmode = {mode}\n"
            )

    for spec in cfg.runs:
        n = spec.source.photon_number
        if n == 1:
            continue
        out = bundle.runs[spec.name]
        run_dir = outdir / "runs" / spec.name
        with _Stage(f"fit:{spec.name}"):
            if bundle.singles_k is not None:
                out.fit = fit_fringe(out.histogram, k_constraint=n * bundle.singles_k)
            else:
                out.fit = fit_fringe(out.histogram, k_guess=n * spec.fringe.frequency)
            _write_fit(run_dir, "fit", out.histogram, out.fit)

        if cfg.analysis["accidental_subtraction"] and spec.source.kind is SourceKind.MIXED:
            with _Stage(f"accidentals:{spec.name}"):
                run, res = sims[spec.name]
                photons = cfg.analysis["calibration_photons"]
                cal_a = sample_singles_calibration(run, "laser", n_photons=photons)
                cal_b = sample_singles_calibration(run, "dc", n_photons=photons)
                for cal in (cal_a, cal_b):
                    io.write_series(
                        run_dir / f"calibration_{cal.constituent}.tsv",
                        ("pixel", "counts", "rate", "rate_sigma"),
                        np.arange(g.pixel_count),
                        cal.counts,
                        cal.rates,
                        cal.rate_errors,
                    )
                acc = estimate_accidentals(
                    cal_a,
                    cal_b,
                    n,
                    res.report.accidental_pulses,
                    number_resolving=spec.detector.number_resolving,
                    pitch=g.pitch,
                    origin=g.origin,
                )
                io.write_histogram(run_dir / "accidentals.tsv", acc)
                out.corrected = subtract_accidentals(out.histogram, acc)
                io.write_histogram(run_dir / "corrected.tsv", out.corrected)
                k = n * bundle.singles_k if bundle.singles_k is not None else None
                out.corrected_fit = fit_fringe(out.corrected, k_constraint=k, k_guess=n * spec.fringe.frequency)
                _write_fit(run_dir, "fit_corrected", out.corrected, out.corrected_fit)

    if cfg.analysis["joint_maps"]:
        with _Stage("joint-maps"):
            maps = outdir / "joint_maps"
            maps.mkdir()
            for spec in cfg.runs:
                if spec.source.photon_number != 2:
                    continue
                io.write_matrix(maps / f"{spec.name}_theory.tsv", joint_distribution(spec.source, spec.fringe, g))
                io.write_matrix(
                    maps / f"{spec.name}_simulated.tsv", joint_map_2d(sims[spec.name][1].events, g.pixel_count)
                )

    with _Stage("scaling-table"):
        points = []
        for out in bundle.runs.values():
            if out.fit is None:
                continue
            raw_kind = PointKind.CLASSICAL_MEASURED if out.source.kind is SourceKind.CLASSICAL else PointKind.QUANTUM_RAW
            points.append(VisibilityPoint(out.source.photon_number, out.fit.visibility, out.fit.visibility_sigma, raw_kind))
            if out.corrected_fit is not None:
                points.append(
                    VisibilityPoint(
                        out.source.photon_number,
                        out.corrected_fit.visibility,
                        out.corrected_fit.visibility_sigma,
                        PointKind.QUANTUM_CORRECTED,
                    )
                )
        v1 = cfg.runs[0].fringe.singles_visibility
        bundle.scaling = scaling_table(points, singles_visibility=v1)
        (outdir / "scaling.tsv").write_text(bundle.scaling.to_text())

    if cfg.output["plots"]:
        from .plots import render_plots

        with _Stage("plots"):
            render_plots(outdir)

    with _Stage("manifest"):
        files = sorted(p.relative_to(outdir).as_posix() for p in outdir.rglob("*") if p.is_file())
        files = [f for f in files if f != INCOMPLETE_MARKER]
        (outdir / "manifest.txt").write_text("\n".join(files) + "\n")
