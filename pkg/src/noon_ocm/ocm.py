"""Optical centroid measurement and the N-photon absorber it replaces.

Histograms are indexed by the integer pixel sum ``s = i_1 + ... + i_N``; the
centroid coordinate ``origin + pitch * s / N`` is derived only for display
and export. An N-photon histogram over D pixels therefore has
``N * (D - 1) + 1`` bins.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._backend import kernels


@dataclass(frozen=True)
class DetectionEvent:
    pulse_id: int
    pixels: tuple

    def __post_init__(self):
        if self.pulse_id < 0:
            raise ValueError(f"pulse_id must be non-negative, got {self.pulse_id}")
        object.__setattr__(self, "pixels", tuple(sorted(int(p) for p in self.pixels)))

    @property
    def photon_number(self):
        return len(self.pixels)


@dataclass
class EventBatch:
    """Columnar block of equal-size events: ``pixels[k]`` is sorted ascending."""

    pulse_ids: np.ndarray
    pixels: np.ndarray

    def __post_init__(self):
        self.pulse_ids = np.asarray(self.pulse_ids, dtype=np.int64).reshape(-1)
        self.pixels = np.sort(np.asarray(self.pixels, dtype=np.int64), axis=1)
        if self.pixels.ndim != 2 or self.pixels.shape[0] != self.pulse_ids.size:
            raise ValueError("pixels must have shape (n_events, photon_number)")

    @classmethod
    def empty(cls, n):
        return cls(np.zeros(0, dtype=np.int64), np.zeros((0, n), dtype=np.int64))

    @classmethod
    def from_events(cls, events: Sequence[DetectionEvent], n):
        bad = [e for e in events if len(e.pixels) != n]
        if bad:
            raise ValueError(
                f"{len(bad)} event(s) do not have {n} photons; "
                f"first: pulse {bad[0].pulse_id} with pixels {bad[0].pixels}"
            )
        if not events:
            return cls.empty(n)
        return cls([e.pulse_id for e in events], [e.pixels for e in events])

    @classmethod
    def concatenate(cls, batches):
        batches = list(batches)
        return cls(
            np.concatenate([b.pulse_ids for b in batches]),
            np.concatenate([b.pixels for b in batches]),
        )

    @property
    def photon_number(self):
        return self.pixels.shape[1]

    def __len__(self):
        return self.pulse_ids.size

    def __iter__(self):
        for pid, pix in zip(self.pulse_ids.tolist(), self.pixels.tolist()):
            yield DetectionEvent(pid, tuple(pix))

    def __getitem__(self, index):
        if isinstance(index, (int, np.integer)):
            return DetectionEvent(int(self.pulse_ids[index]), tuple(self.pixels[index].tolist()))
        return EventBatch(self.pulse_ids[index], self.pixels[index])


def _as_batch(events, n) -> EventBatch:
    if isinstance(events, EventBatch):
        if len(events) and events.photon_number != n:
            raise ValueError(f"events carry {events.photon_number} photons, expected {n}")
        return events if len(events) else EventBatch.empty(n)
    return EventBatch.from_events(list(events), n)


@dataclass
class CentroidHistogram:
    photon_number: int
    pixel_count: int
    counts: np.ndarray
    errors: np.ndarray = None
    pitch: float = 1.0
    origin: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.float64)
        expected = self.photon_number * (self.pixel_count - 1) + 1
        if self.counts.shape != (expected,):
            raise ValueError(
                f"N={self.photon_number}, D={self.pixel_count} needs {expected} bins, "
                f"got shape {self.counts.shape}"
            )
        if self.errors is None:
            self.errors = np.sqrt(np.clip(self.counts, 0, None))
        self.errors = np.asarray(self.errors, dtype=np.float64)
        if self.errors.shape != self.counts.shape:
            raise ValueError("errors and counts must have the same shape")

    @property
    def n_bins(self):
        return self.counts.size

    @property
    def bin_sums(self):
        return np.arange(self.n_bins)

    @property
    def centroids(self):
        """Centroid coordinate of each bin in the geometry's length units."""
        return self.origin + self.pitch * self.bin_sums / self.photon_number

    @property
    def poisson_errors(self):
        """Errors with the weighted-fit floor: zero-count, zero-error bins get sigma 1."""
        err = self.errors.copy()
        err[(err <= 0) & (self.counts == 0)] = 1.0
        return err

    @property
    def total(self):
        return float(self.counts.sum())

    def _check_compatible(self, other):
        if (self.photon_number, self.pixel_count) != (other.photon_number, other.pixel_count):
            raise ValueError(
                f"histogram shapes differ: N={self.photon_number}, D={self.pixel_count} vs "
                f"N={other.photon_number}, D={other.pixel_count}"
            )

    def merge(self, other: "CentroidHistogram") -> "CentroidHistogram":
        """Bin-wise sum of independent shards; errors add in quadrature."""
        self._check_compatible(other)
        return CentroidHistogram(
            self.photon_number,
            self.pixel_count,
            self.counts + other.counts,
            np.hypot(self.errors, other.errors),
            pitch=self.pitch,
            origin=self.origin,
        )

    def scaled(self, factor):
        return CentroidHistogram(
            self.photon_number,
            self.pixel_count,
            self.counts * factor,
            self.errors * abs(factor),
            pitch=self.pitch,
            origin=self.origin,
            meta=dict(self.meta),
        )


def n_bins(n, d):
    return n * (d - 1) + 1


def project_distribution(P, n, d, *, total=1.0, pitch=1.0, origin=0.0):
    """Collapse an ordered-tuple joint law onto the pixel-sum axis.

    Returns expected counts for ``total`` events; with the default total of 1
    the counts are the centroid probabilities themselves.
    """
    P = np.asarray(P, dtype=np.float64)
    if P.shape != (d,) * n:
        raise ValueError(f"joint tensor shape {P.shape} does not match N={n}, D={d}")
    sums = np.zeros((d,) * n, dtype=np.int64)
    for axis in range(n):
        shape = [1] * n
        shape[axis] = d
        sums = sums + np.arange(d).reshape(shape)
    weights = np.bincount(sums.ravel(), weights=P.ravel(), minlength=n_bins(n, d))
    counts = total * weights
    return CentroidHistogram(n, d, counts, np.sqrt(np.clip(counts, 0, None)), pitch=pitch, origin=origin)


def project_events(events, n, d, *, pitch=1.0, origin=0.0):
    """Histogram every N-photon event by its pixel sum; nothing is discarded."""
    batch = _as_batch(events, n)
    if len(batch) and (batch.pixels.min() < 0 or batch.pixels.max() >= d):
        raise ValueError(f"event pixel index outside [0, {d - 1}]")
    counts = kernels.pixel_sum_counts(np.ascontiguousarray(batch.pixels), n_bins(n, d))
    return CentroidHistogram(n, d, counts, pitch=pitch, origin=origin)


def absorber_select(events, n):
    """Keep only events where all N photons hit one pixel.

    Returns ``(kept, efficiency)`` with efficiency = kept / total (0 for no events).
    """
    batch = _as_batch(events, n)
    if not len(batch):
        return batch, 0.0
    same = batch.pixels[:, 0] == batch.pixels[:, -1]
    kept = batch[same]
    return kept, len(kept) / len(batch)


def joint_map_2d(events, d):
    """D x D two-photon coincidence map, mirrored about the diagonal.

    Each unordered pair lands at ``(min, max)`` and is copied to ``(max, min)``;
    same-pixel events are counted once on the diagonal.
    """
    batch = _as_batch(events, 2)
    m = np.zeros((d, d), dtype=np.int64)
    lo, hi = batch.pixels[:, 0], batch.pixels[:, 1]
    np.add.at(m, (lo, hi), 1)
    off = lo != hi
    np.add.at(m, (hi[off], lo[off]), 1)
    return m


def joint_map_theory(P):
    """Ordered-pair probabilities already symmetric; returned as a plain matrix."""
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("joint_map_theory needs a two-photon (D x D) tensor")
    return P.copy()
