"""Compiled inner loops. Loop order is fixed so results are bit-reproducible."""

import math

import numba
import numpy as np


@numba.njit(cache=True)
def mixture_logsumexp(w, c, out):
    """out[n] = log sum_k exp(-|w[n] - c[k]|^2 / 2) for whitened w, c."""
    n_pts, d = w.shape
    n_comp = c.shape[0]
    expo = np.empty(n_comp)
    for n in range(n_pts):
        top = -np.inf
        for k in range(n_comp):
            acc = 0.0
            for j in range(d):
                diff = w[n, j] - c[k, j]
                acc += diff * diff
            e = -0.5 * acc
            expo[k] = e
            if e > top:
                top = e
        s = 0.0
        for k in range(n_comp):
            s += math.exp(expo[k] - top)
        out[n] = top + math.log(s)


@numba.njit(cache=True)
def assemble_band(n_free, bw, rows, cols, local, coef, band):
    """Accumulate coef[t] * local[t, e] into LAPACK upper band storage.

    ``band`` has shape (bw + 1, n_free) with A[i, j] (i <= j) stored at
    ``band[bw + i - j, j]``. Entries are visited in a fixed order.
    """
    band[:, :] = 0.0
    n_tri = local.shape[0]
    for t in range(n_tri):
        a = coef[t]
        for e in range(local.shape[1]):
            i = rows[t, e]
            j = cols[t, e]
            if i >= 0 and j >= 0 and i <= j:
                band[bw + i - j, j] += a * local[t, e]
