"""Dynamic time warping with absolute-difference cost.

Allowed steps are (1,0), (0,1), (1,1). Alignment warps every sequence onto
the median-length reference; samples mapped to a repeated reference index
are averaged.
"""

from __future__ import annotations

import numpy as np


def dtw_path(a, b):
    """Optimal monotone alignment of scalar or (T, dims) sequences.

    Frame cost is the L1 distance; returns (distance, path).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        raise ValueError("sequences must be non-empty")
    cost = np.abs(a[:, None] - b[None, :])
    if cost.ndim == 3:
        cost = cost.sum(axis=2)
    acc = np.full((n, m), np.inf)
    acc[0, 0] = cost[0, 0]
    for j in range(1, m):
        acc[0, j] = acc[0, j - 1] + cost[0, j]
    for i in range(1, n):
        acc[i, 0] = acc[i - 1, 0] + cost[i, 0]
        row_prev = acc[i - 1]
        row = acc[i]
        for j in range(1, m):
            row[j] = cost[i, j] + min(row_prev[j - 1], row_prev[j], row[j - 1])
    # Backtrack, preferring the diagonal on ties.
    path = [(n - 1, m - 1)]
    i, j = n - 1, m - 1
    while (i, j) != (0, 0):
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            best = min(acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1])
            if acc[i - 1, j - 1] == best:
                i, j = i - 1, j - 1
            elif acc[i - 1, j] == best:
                i -= 1
            else:
                j -= 1
        path.append((i, j))
    path.reverse()
    return float(acc[n - 1, m - 1]), path


def dtw_distance(a, b) -> float:
    return dtw_path(a, b)[0]


def dtw_align(sequences):
    """Warp all sequences onto the median-length one.

    Returns (T_dtw, aligned) where every aligned sequence has the reference
    length. The reference itself passes through unchanged.
    """
    if len(sequences) < 2:
        raise ValueError("need at least two sequences to align")
    seqs = [np.asarray(s, dtype=np.float64) for s in sequences]
    if any(len(s) == 0 for s in seqs):
        raise ValueError("sequences must be non-empty")
    lengths = sorted(len(s) for s in seqs)
    median_len = lengths[(len(lengths) - 1) // 2]
    ref_idx = next(i for i, s in enumerate(seqs) if len(s) == median_len)
    ref = seqs[ref_idx]
    t_dtw = len(ref)
    aligned = []
    for i, s in enumerate(seqs):
        if i == ref_idx:
            aligned.append(ref.copy())
            continue
        _, path = dtw_path(ref, s)
        sums = np.zeros((t_dtw,) + s.shape[1:])
        counts = np.zeros(t_dtw)
        for ri, si in path:
            sums[ri] += s[si]
            counts[ri] += 1
        aligned.append(sums / counts.reshape((-1,) + (1,) * (sums.ndim - 1)))
    return t_dtw, aligned
