"""Visibility scaling, accidental-coincidence estimation and subtraction."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

import numpy as np

from ._backend import kernels
from .fit import fit_fringe
from .ocm import CentroidHistogram
from .sim import SinglesCalibration


def classical_visibility_theory(n, singles_visibility=1.0):
    """Centroid-fringe visibility for N photons of classical light: V1^N / 2^(N-1)."""
    if n < 1:
        raise ValueError(f"photon number must be >= 1, got {n}")
    if not 0 <= singles_visibility <= 1:
        raise ValueError(f"singles visibility must lie in [0, 1], got {singles_visibility}")
    return singles_visibility**n / 2 ** (n - 1)


def _rates(cal):
    if isinstance(cal, SinglesCalibration):
        return cal.rates, cal.rate_errors
    r = np.asarray(cal, dtype=np.float64)
    return r, np.zeros_like(r)


def estimate_accidentals(
    singles_a,
    singles_b,
    n,
    pulses,
    *,
    number_resolving=False,
    pitch=1.0,
    origin=0.0,
) -> CentroidHistogram:
    """Expected N-fold accidentals per centroid bin from singles rates.

    Photons are assumed uncorrelated, each pixel firing with the combined
    per-pulse rate ``r = a + b``. Ordered tuples with a repeated pixel are
    left out unless the detectors resolve photon number. ``singles_*`` may be
    :class:`SinglesCalibration` objects (errors propagated from their Poisson
    counts) or bare rate arrays (treated as exact).
    """
    ra, ea = _rates(singles_a)
    rb, eb = _rates(singles_b)
    if ra.shape != rb.shape or ra.ndim != 1:
        raise ValueError(f"calibration vectors differ in length: {ra.shape} vs {rb.shape}")
    r = ra + rb
    if np.any(r < 0) or np.any(r > 1):
        raise ValueError("per-pulse singles rates must lie in [0, 1]")
    d = r.size
    if n == 1:
        counts = pulses * r
        errors = pulses * np.hypot(ea, eb)
        return CentroidHistogram(1, d, counts, errors, pitch=pitch, origin=origin)
    weights, jac = kernels.tuple_sum_weights(np.ascontiguousarray(r), n, not number_resolving)
    counts = pulses * weights
    var_r = ea**2 + eb**2
    errors = pulses * np.sqrt((jac**2) @ var_r)
    return CentroidHistogram(n, d, counts, errors, pitch=pitch, origin=origin)


def subtract_accidentals(raw: CentroidHistogram, acc: CentroidHistogram) -> CentroidHistogram:
    """Bin-wise ``raw - acc``; negative results are kept, errors add in quadrature.

    Empty raw bins contribute the usual Poisson floor of 1 so they cannot end
    up with an artificially tiny error.
    """
    raw._check_compatible(acc)
    return CentroidHistogram(
        raw.photon_number,
        raw.pixel_count,
        raw.counts - acc.counts,
        np.hypot(raw.poisson_errors, acc.errors),
        pitch=raw.pitch,
        origin=raw.origin,
        meta={**raw.meta, "accidentals_subtracted": True},
    )


def singles_frequency(hist: CentroidHistogram):
    """Unconstrained fit to a one-photon histogram; returns ``(k1, fit)``."""
    if hist.photon_number != 1:
        raise ValueError("singles frequency needs an N=1 histogram")
    fit = fit_fringe(hist)
    return abs(fit.params["frequency"]), fit


class PointKind(str, Enum):
    CLASSICAL_THEORY = "classical-theory"
    CLASSICAL_MEASURED = "classical-measured"
    QUANTUM_RAW = "quantum-raw"
    QUANTUM_CORRECTED = "quantum-corrected"


@dataclass(frozen=True)
class VisibilityPoint:
    n: int
    visibility: float
    sigma: float
    kind: PointKind

    def __post_init__(self):
        object.__setattr__(self, "kind", PointKind(self.kind))
        if self.sigma < 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")


# Experimental centroid visibilities measured on an 11-pixel fiber array
# (value, one-sigma), keyed by photon number.
PUBLISHED_VISIBILITIES = {
    PointKind.CLASSICAL_MEASURED: {2: (0.44, 0.09), 3: (0.18, 0.04), 4: (0.14, 0.04)},
    PointKind.QUANTUM_RAW: {2: (0.49, 0.04), 3: (0.44, 0.05), 4: (0.41, 0.06)},
    PointKind.QUANTUM_CORRECTED: {2: (0.65, 0.04), 3: (0.61, 0.06), 4: (0.59, 0.08)},
}


def published_points() -> list:
    return [
        VisibilityPoint(n, v, s, kind)
        for kind, rows in PUBLISHED_VISIBILITIES.items()
        for n, (v, s) in rows.items()
    ]


_MEASURED_KINDS = [PointKind.CLASSICAL_MEASURED, PointKind.QUANTUM_RAW, PointKind.QUANTUM_CORRECTED]
SCALING_COLUMNS = ["N", "classical_theory"] + [
    f"{k.value.replace('-', '_')}{suffix}" for k in _MEASURED_KINDS for suffix in ("", "_sigma")
]


@dataclass
class ScalingTable:
    columns: list
    rows: list

    def to_text(self, delimiter="\t"):
        def fmt(v):
            if v is None or (isinstance(v, float) and math.isnan(v)):
                return "nan"
            return repr(v) if isinstance(v, float) else str(v)

        out = [delimiter.join(self.columns)]
        out += [delimiter.join(fmt(v) for v in row) for row in self.rows]
        return "\n".join(out) + "\n"

    @classmethod
    def from_text(cls, text, delimiter="\t"):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        columns = lines[0].split(delimiter)
        rows = []
        for ln in lines[1:]:
            vals = ln.split(delimiter)
            rows.append([int(vals[0])] + [float(v) for v in vals[1:]])
        return cls(columns, rows)

    def column(self, name):
        j = self.columns.index(name)
        return [row[j] for row in self.rows]


def scaling_table(points: Iterable[VisibilityPoint], n_max=None, singles_visibility=1.0) -> ScalingTable:
    """Visibility-versus-N table: classical theory at every N plus measured points."""
    points = list(points)
    measured = [p for p in points if p.kind is not PointKind.CLASSICAL_THEORY]
    if n_max is None:
        n_max = max([4] + [p.n for p in points])
    cells = {(p.kind, p.n): p for p in measured}
    rows = []
    for n in range(1, n_max + 1):
        row = [n, classical_visibility_theory(n, singles_visibility)]
        for kind in _MEASURED_KINDS:
            p = cells.get((kind, n))
            row += [p.visibility, p.sigma] if p else [float("nan"), float("nan")]
        rows.append(row)
    return ScalingTable(list(SCALING_COLUMNS), rows)
