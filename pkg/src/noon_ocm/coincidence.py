"""Pulse-binned coincidence counting across every combination of channels.

A coincidence is any set of channels firing in the same laser pulse. Pulses
with exactly N firings become N-fold events and increment the counter of
their channel subset; other multiplicities are tallied by k but never split
into N-subsets.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb
from typing import Iterable, Iterator

import numpy as np

from ._backend import kernels
from .ocm import EventBatch


@dataclass(frozen=True)
class PulseRecord:
    pulse_id: int
    fired: tuple

    def __post_init__(self):
        fired = tuple(int(c) for c in self.fired)
        if len(set(fired)) != len(fired):
            raise ValueError(f"pulse {self.pulse_id}: duplicate channel in {fired}")
        if self.pulse_id < 0:
            raise ValueError(f"pulse_id must be non-negative, got {self.pulse_id}")
        object.__setattr__(self, "fired", tuple(sorted(fired)))


def subset_rank(channels):
    """Colexicographic rank of a sorted channel subset among all subsets of its size."""
    return sum(comb(c, j + 1) for j, c in enumerate(channels))


def subset_unrank(rank, d, n):
    """Inverse of :func:`subset_rank`."""
    out = []
    for j in range(n, 0, -1):
        c = j - 1
        while c + 1 < d and comb(c + 1, j) <= rank:
            c += 1
        out.append(c)
        rank -= comb(c, j)
    return tuple(reversed(out))


class CoincidenceCounter:
    """Streaming N-fold coincidence tables for a D-channel array.

    Feed records with :meth:`update` (in any batching); counters from
    independent shards combine with :meth:`merge`.
    """

    def __init__(self, n_channels, order):
        if order < 1 or order > n_channels:
            raise ValueError(f"order must lie in [1, {n_channels}], got {order}")
        self.n_channels = n_channels
        self.order = order
        self.subset_counts = np.zeros(comb(n_channels, order), dtype=np.int64)
        self.kfold = np.zeros(n_channels + 1, dtype=np.int64)
        self.singles = np.zeros(n_channels, dtype=np.int64)
        self.n_pulses = 0
        self._last_pulse = -1
        self._ids = []
        self._pix = []

    def update(self, records: Iterable[PulseRecord]):
        records = list(records)
        if not records:
            return self
        ids = np.fromiter((r.pulse_id for r in records), dtype=np.int64, count=len(records))
        if ids[0] < self._last_pulse or np.any(np.diff(ids) < 0):
            raise ValueError("pulse ids must be non-decreasing across the stream")
        lengths = np.fromiter((len(r.fired) for r in records), dtype=np.int64, count=len(records))
        offsets = np.zeros(len(records) + 1, dtype=np.int64)
        np.cumsum(lengths, out=offsets[1:])
        channels = np.fromiter(
            (c for r in records for c in r.fired), dtype=np.int64, count=int(offsets[-1])
        )
        subset, kfold, singles = kernels.count_coincidences(
            offsets, channels, self.n_channels, self.order
        )
        self.subset_counts += subset
        self.kfold += kfold
        self.singles += singles
        self.n_pulses += len(records)
        self._last_pulse = int(ids[-1])
        hit = lengths == self.order
        if hit.any():
            self._ids.append(ids[hit])
            self._pix.append(np.array([r.fired for r, h in zip(records, hit) if h], dtype=np.int64))
        return self

    def merge(self, other: "CoincidenceCounter"):
        if (self.n_channels, self.order) != (other.n_channels, other.order):
            raise ValueError("cannot merge counters with different channel count or order")
        out = CoincidenceCounter(self.n_channels, self.order)
        out.subset_counts = self.subset_counts + other.subset_counts
        out.kfold = self.kfold + other.kfold
        out.singles = self.singles + other.singles
        out.n_pulses = self.n_pulses + other.n_pulses
        out._ids = self._ids + other._ids
        out._pix = self._pix + other._pix
        return out

    @property
    def events(self) -> EventBatch:
        if not self._ids:
            return EventBatch.empty(self.order)
        ids = np.concatenate(self._ids)
        pix = np.concatenate(self._pix)
        order = np.argsort(ids, kind="stable")
        return EventBatch(ids[order], pix[order])

    def table(self):
        """``[(channel subset, count), ...]`` over all C(D, N) subsets, in rank order."""
        return [
            (subset_unrank(rank, self.n_channels, self.order), int(count))
            for rank, count in enumerate(self.subset_counts)
        ]

    def count(self, channels):
        return int(self.subset_counts[subset_rank(sorted(channels))])


def extract_coincidences(records: Iterable[PulseRecord], n_channels, order, *, batch_size=65536):
    """Run a full stream through a :class:`CoincidenceCounter`.

    Returns ``(events, counter)``; ``counter.table()`` is the per-combination table.
    """
    counter = CoincidenceCounter(n_channels, order)
    batch = []
    for rec in records:
        batch.append(rec)
        if len(batch) >= batch_size:
            counter.update(batch)
            batch = []
    counter.update(batch)
    return counter.events, counter


@dataclass
class FoldStatistics:
    kfold: np.ndarray
    singles: np.ndarray
    n_pulses: int

    @property
    def singles_rates(self):
        if self.n_pulses == 0:
            return np.zeros(self.singles.size)
        return self.singles / self.n_pulses


def fold_statistics(records: Iterable[PulseRecord], n_channels, *, n_pulses=None):
    """Per-multiplicity pulse totals and per-channel singles.

    Rates are per record unless ``n_pulses`` (e.g. including pulses that
    were never written because nothing fired) is supplied.
    """
    _, counter = extract_coincidences(records, n_channels, 1)
    pulses = counter.n_pulses if n_pulses is None else n_pulses
    return FoldStatistics(counter.kfold.copy(), counter.singles.copy(), pulses)


def brute_force_counts(records: Iterable[PulseRecord], n_channels, order):
    """Reference counter keyed by channel tuples, with no ranking or batching."""
    counts = dict.fromkeys(combinations(range(n_channels), order), 0)
    kfold = [0] * (n_channels + 1)
    singles = [0] * n_channels
    for rec in records:
        fired = sorted(set(rec.fired))
        kfold[len(fired)] += 1
        for c in fired:
            singles[c] += 1
        if len(fired) == order:
            counts[tuple(fired)] += 1
    return counts, kfold, singles


def events_to_pulses(events: EventBatch, partial=()) -> Iterator[PulseRecord]:
    """Pulse records for N-fold events plus optional lower-order events.

    Events with two photons on one pixel cannot be written as pulse records.
    """
    merged = [(int(i), tuple(p)) for i, p in zip(events.pulse_ids.tolist(), events.pixels.tolist())]
    merged += [(e.pulse_id, e.pixels) for e in partial]
    merged.sort(key=lambda item: item[0])
    for pid, pixels in merged:
        yield PulseRecord(pid, pixels)
