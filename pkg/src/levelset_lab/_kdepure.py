"""Pure-numpy KDE summation backend.

Same contract as the compiled `_kdecore` module: `kde_sum` returns, for
each query point, sum_i prod_j K((X_ij - q_j) / h) where K is the
polynomial factor kernel on [-1, 1] and the sample is sorted by its first
coordinate. The first-coordinate window is located with searchsorted and
the ragged windows are flattened into one vectorized pass.
"""

import numpy as np
from numpy.polynomial import polynomial as nppoly

BACKEND = "pure"

# Ragged-window expansion rows processed per chunk.
_CHUNK_ROWS = 1 << 22


def kde_sum(xs: np.ndarray, coeffs: np.ndarray, h: float, queries: np.ndarray) -> np.ndarray:
    xs = np.ascontiguousarray(xs, dtype=float)
    queries = np.ascontiguousarray(queries, dtype=float)
    coeffs = np.asarray(coeffs, dtype=float)
    m = queries.shape[0]
    out = np.zeros(m)
    if xs.shape[0] == 0:
        return out
    x0 = xs[:, 0]
    lo = np.searchsorted(x0, queries[:, 0] - h, side="left")
    hi = np.searchsorted(x0, queries[:, 0] + h, side="right")
    counts = hi - lo
    # Chunk boundaries chosen so each flattened block stays bounded.
    csum = np.concatenate(([0], np.cumsum(counts)))
    start = 0
    while start < m:
        stop = start
        while stop < m and csum[stop + 1] - csum[start] <= _CHUNK_ROWS:
            stop += 1
        stop = max(stop, start + 1)
        _accumulate(xs, coeffs, h, queries, lo, counts, out, start, stop)
        start = stop
    return out


def _accumulate(xs, coeffs, h, queries, lo, counts, out, start, stop):
    c = counts[start:stop]
    total = int(c.sum())
    if total == 0:
        return
    offsets = np.cumsum(c) - c
    rows = np.arange(total) - np.repeat(offsets, c) + np.repeat(lo[start:stop], c)
    qidx = np.repeat(np.arange(start, stop), c)
    u = (xs[rows] - queries[qidx]) / h
    inside = np.all(np.abs(u) <= 1.0, axis=1)
    vals = np.prod(nppoly.polyval(u, coeffs, tensor=False), axis=1)
    vals[~inside] = 0.0
    out[start:stop] = np.bincount(qidx - start, weights=vals, minlength=stop - start)
