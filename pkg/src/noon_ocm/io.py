"""Delimited-text readers and writers for every artifact the package exchanges.

Floats are written with ``repr`` so a write/read round trip is exact and
repeated runs produce byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .coincidence import CoincidenceCounter, PulseRecord
from .ocm import CentroidHistogram, DetectionEvent, EventBatch

HISTOGRAM_COLUMNS = ("bin_sum", "centroid", "counts", "sigma")


def _f(v):
    return repr(float(v))


def write_histogram(path, hist: CentroidHistogram):
    lines = [
        f"# photon_number = {hist.photon_number}",
        f"# pixel_count = {hist.pixel_count}",
        f"# pitch = {_f(hist.pitch)}",
        f"# origin = {_f(hist.origin)}",
        "\t".join(HISTOGRAM_COLUMNS),
    ]
    for s, x, c, e in zip(hist.bin_sums, hist.centroids, hist.counts, hist.errors):
        lines.append(f"{s}\t{_f(x)}\t{_f(c)}\t{_f(e)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_histogram(path) -> CentroidHistogram:
    meta, rows = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            meta[key.strip()] = value.strip()
        elif line.strip() and not line.startswith(HISTOGRAM_COLUMNS[0]):
            rows.append([float(v) for v in line.split("\t")])
    rows = np.array(rows).reshape(-1, 4)
    n = int(meta.get("photon_number", 0))
    d = int(meta.get("pixel_count", 0))
    if not n or not d:
        raise ValueError(f"{path}: missing photon_number / pixel_count header")
    return CentroidHistogram(
        n, d, rows[:, 2], rows[:, 3], pitch=float(meta.get("pitch", 1.0)), origin=float(meta.get("origin", 0.0))
    )


def write_matrix(path, m):
    m = np.asarray(m)
    fmt = (lambda v: str(int(v))) if np.issubdtype(m.dtype, np.integer) else _f
    Path(path).write_text("\n".join("\t".join(fmt(v) for v in row) for row in m) + "\n")


def read_matrix(path):
    rows = [ln.split("\t") for ln in Path(path).read_text().splitlines() if ln.strip()]
    return np.array([[float(v) for v in row] for row in rows])


def format_events(pulse_ids, pixel_rows):
    return "".join(
        "\t".join([str(pid)] + [str(p) for p in pix]) + "\n" for pid, pix in zip(pulse_ids, pixel_rows)
    )


def write_events(path, events: EventBatch, partial=()):
    """One event per line: pulse id, then its sorted pixel indices."""
    with open(path, "w") as fh:
        fh.write(format_events(events.pulse_ids.tolist(), events.pixels.tolist()))
        if partial:
            fh.write(format_events([e.pulse_id for e in partial], [e.pixels for e in partial]))


def read_events(path, n=None):
    """Events of size ``n`` as an :class:`EventBatch`; with ``n=None`` a list of events."""
    events = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        vals = [int(v) for v in line.split()]
        events.append(DetectionEvent(vals[0], tuple(vals[1:])))
    if n is None:
        return events
    return EventBatch.from_events(events, n)


def read_pulses(path):
    """Pulse-stream file: pulse id followed by the fired channels (maybe none)."""
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip() or line.startswith("#"):
                continue
            try:
                vals = [int(v) for v in line.replace(",", " ").split()]
                yield PulseRecord(vals[0], tuple(vals[1:]))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None


def write_pulses(path, records):
    with open(path, "w") as fh:
        for r in records:
            fh.write(" ".join(str(v) for v in (r.pulse_id, *r.fired)) + "\n")


def write_count_table(path, counter: CoincidenceCounter):
    lines = ["channels\tcount"]
    lines += [f"{','.join(map(str, sub))}\t{count}" for sub, count in counter.table()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_count_table(path):
    table = {}
    for line in Path(path).read_text().splitlines()[1:]:
        sub, count = line.split("\t")
        table[tuple(int(c) for c in sub.split(","))] = int(count)
    return table


def write_series(path, columns, *series):
    lines = ["\t".join(columns)]
    lines += ["\t".join(_f(v) for v in row) for row in zip(*series)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_series(path):
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    columns = lines[0].split("\t")
    data = np.array([[float(v) for v in ln.split("\t")] for ln in lines[1:]]).reshape(-1, len(columns))
    return {c: data[:, j] for j, c in enumerate(columns)}
