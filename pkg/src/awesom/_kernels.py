"""Compiled inner loops for BMU search, stochastic training, and bulk mapping.

All kernels accumulate squared distances in float64 feature order, so a naive
scalar-loop oracle reproduces them bit for bit. The bulk kernel is parallel
over rows; every row writes only its own output slot, which makes the result
independent of the thread count.
"""

import math

import numba
import numpy as np
from numba import njit, prange


@njit(cache=True)
def bmu_scan_one(weights, row):
    """Return (index, squared distance) of the nearest node to one sample.

    Ties resolve to the lowest linear index because only a strictly smaller
    distance replaces the running best.
    """
    best = 0
    best_d = np.inf
    for m in range(weights.shape[0]):
        acc = 0.0
        for j in range(row.shape[0]):
            d = weights[m, j] - row[j]
            acc += d * d
        if acc < best_d:
            best_d = acc
            best = m
    return best, best_d


@njit(parallel=True, cache=True)
def bmu_scan_all(weights, values):
    """BMU index and squared distance for every row of ``values``."""
    n = values.shape[0]
    idx = np.empty(n, dtype=np.int64)
    sq = np.empty(n, dtype=np.float64)
    for i in prange(n):
        best, best_d = bmu_scan_one(weights, values[i])
        idx[i] = best
        sq[i] = best_d
    return idx, sq


@njit(cache=True)
def train_loop(weights, values, sample_idx, alpha, radius0, x):
    """Run the stochastic training loop in place.

    For step t the neighborhood radius is max(1, ceil(radius0 * (1 - t/steps)))
    and every node whose Euclidean lattice-coordinate distance to the BMU is
    strictly below it moves by alpha * (sample - weight).
    """
    steps = sample_idx.shape[0]
    n_nodes = weights.shape[0]
    f = weights.shape[1]
    for t in range(steps):
        row = values[sample_idx[t]]
        c, _ = bmu_scan_one(weights, row)
        r = max(1.0, math.ceil(radius0 * (1.0 - t / steps)))
        rsq = r * r
        c_col = c % x
        c_row = c // x
        for m in range(n_nodes):
            dc = (m % x) - c_col
            dr = (m // x) - c_row
            if dc * dc + dr * dr < rsq:
                for j in range(f):
                    weights[m, j] += alpha * (row[j] - weights[m, j])


def set_thread_count(threads):
    """Pin the parallel kernels to ``threads`` OS threads (clamped to legal range)."""
    limit = numba.config.NUMBA_NUM_THREADS
    threads = max(1, min(int(threads), limit))
    numba.set_num_threads(threads)
    return threads


def max_thread_count():
    return numba.config.NUMBA_NUM_THREADS
