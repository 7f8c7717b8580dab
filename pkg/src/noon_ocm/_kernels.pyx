# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Must stay call-compatible with ``_kernels_py``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef cnp.int64_t[:, ::1] _binomial_table(Py_ssize_t n, Py_ssize_t k):
    cdef cnp.int64_t[:, ::1] table = np.zeros((n + 1, k + 1), dtype=np.int64)
    cdef Py_ssize_t i, j
    for i in range(n + 1):
        table[i, 0] = 1
        for j in range(1, min(i, k) + 1):
            table[i, j] = table[i - 1, j - 1] + (table[i - 1, j] if j <= i - 1 else 0)
    return table


def pixel_sum_counts(cnp.int64_t[:, ::1] pixels, Py_ssize_t nbins):
    cdef Py_ssize_t m = pixels.shape[0], n = pixels.shape[1]
    cdef Py_ssize_t i, j
    cdef cnp.int64_t s
    out = np.zeros(nbins, dtype=np.int64)
    cdef cnp.int64_t[::1] counts = out
    for i in range(m):
        s = 0
        for j in range(n):
            s += pixels[i, j]
        if s < 0 or s >= nbins:
            raise ValueError(f"event {i} has pixel sum {s} outside [0, {nbins - 1}]")
        counts[s] += 1
    return out


def count_coincidences(cnp.int64_t[::1] offsets, cnp.int64_t[::1] channels,
                       Py_ssize_t n_channels, Py_ssize_t order):
    cdef Py_ssize_t n_pulses = offsets.shape[0] - 1
    cdef cnp.int64_t[:, ::1] binom = _binomial_table(n_channels, order)
    cdef Py_ssize_t n_subsets = binom[n_channels, order]
    subset_out = np.zeros(n_subsets, dtype=np.int64)
    kfold_out = np.zeros(n_channels + 1, dtype=np.int64)
    singles_out = np.zeros(n_channels, dtype=np.int64)
    cdef cnp.int64_t[::1] subset = subset_out
    cdef cnp.int64_t[::1] kfold = kfold_out
    cdef cnp.int64_t[::1] singles = singles_out
    cdef unsigned char[::1] seen = np.zeros(n_channels, dtype=np.uint8)
    cdef Py_ssize_t p, a, b, k, j, rank
    cdef cnp.int64_t ch
    cdef cnp.int64_t[::1] buf = np.zeros(n_channels, dtype=np.int64)

    for p in range(n_pulses):
        a = offsets[p]
        b = offsets[p + 1]
        k = b - a
        if k > n_channels:
            raise ValueError(f"pulse {p}: {k} channels fired but only {n_channels} exist")
        for j in range(k):
            ch = channels[a + j]
            if ch < 0 or ch >= n_channels:
                for j2 in range(j):
                    seen[channels[a + j2]] = 0
                raise ValueError(f"pulse {p}: channel {ch} out of range [0, {n_channels - 1}]")
            if seen[ch]:
                for j2 in range(j):
                    seen[channels[a + j2]] = 0
                raise ValueError(f"pulse {p}: channel {ch} listed twice")
            seen[ch] = 1
            singles[ch] += 1
        kfold[k] += 1
        if k == order:
            # channels sorted via the seen mask, ranked in colex order
            j = 0
            for ch in range(n_channels):
                if seen[ch]:
                    buf[j] = ch
                    j += 1
            rank = 0
            for j in range(k):
                rank += binom[buf[j], j + 1]
            subset[rank] += 1
        for j in range(k):
            seen[channels[a + j]] = 0
    return subset_out, kfold_out, singles_out


def tuple_sum_weights(cnp.float64_t[::1] rates, Py_ssize_t order, bint distinct):
    """Ordered-tuple pixel-sum weights and their Jacobian w.r.t. each rate."""
    cdef Py_ssize_t d = rates.shape[0]
    cdef Py_ssize_t nbins = order * (d - 1) + 1
    cdef Py_ssize_t i, k, s, excl
    cdef double fact = 1.0
    weights_out = np.zeros(nbins, dtype=np.float64)
    jac_out = np.zeros((nbins, d), dtype=np.float64)
    cdef double[::1] w = weights_out
    cdef double[:, ::1] jac = jac_out
    # poly[k, s]: coefficient of z^s in the degree-k generating polynomial
    cdef double[:, ::1] poly = np.zeros((order + 1, nbins), dtype=np.float64)

    for k in range(2, order + 1):
        fact *= k

    if not distinct:
        poly[0, 0] = 1.0
        for k in range(1, order + 1):
            for s in range(nbins):
                if poly[k - 1, s] != 0.0:
                    for i in range(d):
                        if s + i < nbins:
                            poly[k, s + i] += poly[k - 1, s] * rates[i]
        for s in range(nbins):
            w[s] = poly[order, s]
        for i in range(d):
            for s in range(nbins - i):
                jac[s + i, i] = order * poly[order - 1, s]
        return weights_out, jac_out

    # elementary symmetric polynomials of y_i = r_i z^i, optionally skipping one pixel
    for excl in range(-1, d):
        poly[:, :] = 0.0
        poly[0, 0] = 1.0
        for i in range(d):
            if i == excl:
                continue
            for k in range(order, 0, -1):
                for s in range(nbins - 1, i - 1, -1):
                    poly[k, s] += poly[k - 1, s - i] * rates[i]
        if excl < 0:
            for s in range(nbins):
                w[s] = fact * poly[order, s]
        else:
            for s in range(nbins - excl):
                jac[s + excl, excl] = fact * poly[order - 1, s]
    return weights_out, jac_out
