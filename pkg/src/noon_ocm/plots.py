"""Headless SVG figures drawn only from a bundle's text artifacts.

Each SVG carries the plotted series as JSON in its ``<dc:description>``
metadata so a figure can be checked against the text files it came from.
"""

from __future__ import annotations

import json
import logging
import math
from pathlib import Path

import matplotlib

matplotlib.use("svg")
import matplotlib.pyplot as plt  # noqa: E402

from . import io  # noqa: E402
from .analysis import ScalingTable  # noqa: E402

log = logging.getLogger(__name__)

matplotlib.rcParams["svg.hashsalt"] = "noon-ocm"
matplotlib.rcParams["svg.fonttype"] = "none"


def _clean(values):
    return [None if isinstance(v, float) and math.isnan(v) else float(v) for v in values]


def _save(fig, path, series):
    meta = {"Description": json.dumps(series, sort_keys=True), "Date": None, "Creator": "noon_ocm"}
    fig.savefig(path, format="svg", metadata=meta)
    plt.close(fig)
    return path


def read_embedded_series(path):
    """Recover the JSON series embedded by :func:`render_plots`."""
    text = Path(path).read_text()
    start = text.index("<dc:description>") + len("<dc:description>")
    end = text.index("</dc:description>", start)
    from xml.sax.saxutils import unescape

    return json.loads(unescape(text[start:end], {"&quot;": '"', "&apos;": "'"}))


def _classical_period(bundle):
    path = bundle / "singles_frequency.txt"
    if not path.exists():
        return None
    for line in path.read_text().splitlines():
        key, _, value = line.partition("=")
        if key.strip() == "period_m":
            return float(value)
    return None


def _histogram_plot(run_dir, stem, fit_stem, period, out):
    hist = io.read_histogram(run_dir / f"{stem}.tsv")
    x, y, e = hist.centroids, hist.counts, hist.errors
    series = {"centroid": x.tolist(), "counts": y.tolist(), "sigma": e.tolist()}
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.errorbar(x * 1e3, y, yerr=e, fmt="o", ms=3, capsize=2, label="data")
    curve_path = run_dir / f"{fit_stem}_curve.tsv"
    if curve_path.exists():
        curve = io.read_series(curve_path)
        series["fit_centroid"] = curve["centroid"].tolist()
        series["fit_model"] = curve["model"].tolist()
        ax.plot(curve["centroid"] * 1e3, curve["model"], "-", label="fit")
    if period:
        lo, hi = x[0], x[-1]
        lines, m = [], math.ceil(lo / period)
        while m * period <= hi:
            lines.append(m * period)
            m += 1
        for xv in lines:
            ax.axvline(xv * 1e3, ls="--", color="0.5", lw=0.8)
        series["classical_period_lines"] = lines
    ax.set_xlabel("centroid (mm)")
    ax.set_ylabel("counts")
    ax.set_title(f"{run_dir.name} N={hist.photon_number}" + (" (accidentals subtracted)" if stem == "corrected" else ""))
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    return _save(fig, out, series)


def _scaling_plot(path, out):
    table = ScalingTable.from_text(path.read_text())
    ns = table.column("N")
    series = {c: _clean(table.column(c)) for c in table.columns}
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.plot(ns, table.column("classical_theory"), "-", color="tab:blue", label="classical theory")
    styles = {
        "classical_measured": ("^", "tab:blue"),
        "quantum_raw": ("o", "tab:red"),
        "quantum_corrected": ("s", "tab:red"),
    }
    for col, (marker, color) in styles.items():
        v, s = table.column(col), table.column(col + "_sigma")
        pts = [(n, a, b) for n, a, b in zip(ns, v, s) if not math.isnan(a)]
        if pts:
            n_, a_, b_ = zip(*pts)
            ax.errorbar(n_, a_, yerr=b_, fmt=marker, color=color, mfc="none" if col == "quantum_raw" else color, label=col.replace("_", " "))
    ax.set_xlabel("photon number N")
    ax.set_ylabel("centroid visibility")
    ax.set_ylim(0, 1.1)
    ax.set_xticks(ns)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    return _save(fig, out, series)


def _map_plot(path, out):
    m = io.read_matrix(path)
    fig, ax = plt.subplots(figsize=(3.5, 3.2))
    im = ax.imshow(m, origin="lower", cmap="viridis")
    ax.set_xlabel("pixel x2")
    ax.set_ylabel("pixel x1")
    ax.set_title(path.stem)
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    return _save(fig, out, {"matrix": m.tolist()})


def render_plots(bundle_dir):
    """Write one SVG per histogram, joint map and scaling table found in the bundle."""
    bundle = Path(bundle_dir)
    plot_dir = bundle / "plots"
    period = _classical_period(bundle)
    jobs = []
    for run_dir in sorted((bundle / "runs").glob("*")) if (bundle / "runs").exists() else []:
        if (run_dir / "histogram.tsv").exists():
            jobs.append(("hist", run_dir, "histogram", "fit", plot_dir / f"{run_dir.name}.svg"))
        if (run_dir / "corrected.tsv").exists():
            jobs.append(("hist", run_dir, "corrected", "fit_corrected", plot_dir / f"{run_dir.name}_corrected.svg"))
    if (bundle / "scaling.tsv").exists():
        jobs.append(("scaling", bundle / "scaling.tsv", None, None, plot_dir / "scaling.svg"))
    for path in sorted((bundle / "joint_maps").glob("*.tsv")) if (bundle / "joint_maps").exists() else []:
        jobs.append(("map", path, None, None, plot_dir / f"joint_{path.stem}.svg"))
    if not jobs:
        log.warning("nothing to plot in %s", bundle)
        return []
    plot_dir.mkdir(exist_ok=True)
    written = []
    for kind, src, stem, fit_stem, out in jobs:
        if kind == "hist":
            written.append(_histogram_plot(src, stem, fit_stem, period, out))
        elif kind == "scaling":
            written.append(_scaling_plot(src, out))
        else:
            written.append(_map_plot(src, out))
    return written
