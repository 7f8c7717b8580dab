"""Pure-Python fallback for the compiled kernels in ``_kernels.pyx``.

Same signatures, same results; used when the extension was not built.
"""

from math import comb, factorial

import numpy as np


def pixel_sum_counts(pixels, nbins):
    sums = np.asarray(pixels, dtype=np.int64).sum(axis=1)
    if sums.size and (sums.min() < 0 or sums.max() >= nbins):
        bad = int(np.flatnonzero((sums < 0) | (sums >= nbins))[0])
        raise ValueError(f"event {bad} has pixel sum {sums[bad]} outside [0, {nbins - 1}]")
    return np.bincount(sums, minlength=nbins).astype(np.int64)


def count_coincidences(offsets, channels, n_channels, order):
    subset = np.zeros(comb(n_channels, order), dtype=np.int64)
    kfold = np.zeros(n_channels + 1, dtype=np.int64)
    singles = np.zeros(n_channels, dtype=np.int64)
    offsets = [int(o) for o in offsets]
    channels = [int(c) for c in channels]
    for p in range(len(offsets) - 1):
        fired = channels[offsets[p]:offsets[p + 1]]
        if len(fired) > n_channels:
            raise ValueError(f"pulse {p}: {len(fired)} channels fired but only {n_channels} exist")
        seen = set()
        for ch in fired:
            if ch < 0 or ch >= n_channels:
                raise ValueError(f"pulse {p}: channel {ch} out of range [0, {n_channels - 1}]")
            if ch in seen:
                raise ValueError(f"pulse {p}: channel {ch} listed twice")
            seen.add(ch)
        for ch in fired:
            singles[ch] += 1
        kfold[len(fired)] += 1
        if len(fired) == order:
            rank = sum(comb(c, j + 1) for j, c in enumerate(sorted(fired)))
            subset[rank] += 1
    return subset, kfold, singles


def _esym(rates, order, nbins, skip=-1):
    poly = np.zeros((order + 1, nbins))
    poly[0, 0] = 1.0
    for i, r in enumerate(rates):
        if i == skip:
            continue
        for k in range(order, 0, -1):
            poly[k, i:] += poly[k - 1, :nbins - i] * r
    return poly


def tuple_sum_weights(rates, order, distinct):
    """Ordered-tuple pixel-sum weights and their Jacobian w.r.t. each rate."""
    rates = np.asarray(rates, dtype=np.float64)
    d = rates.size
    nbins = order * (d - 1) + 1
    jac = np.zeros((nbins, d))
    if not distinct:
        powers = [np.array([1.0])]
        for _ in range(order):
            powers.append(np.convolve(powers[-1], rates))
        weights = np.zeros(nbins)
        weights[:powers[order].size] = powers[order]
        lower = powers[order - 1]
        for i in range(d):
            jac[i:i + lower.size, i] = order * lower
        return weights, jac
    fact = float(factorial(order))
    weights = fact * _esym(rates, order, nbins)[order]
    for i in range(d):
        lower = _esym(rates, order, nbins, skip=i)[order - 1]
        jac[i:, i] = fact * lower[:nbins - i]
    return weights, jac
