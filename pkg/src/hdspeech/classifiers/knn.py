"""Nearest-neighbour classification with Euclidean or DTW distances."""

from __future__ import annotations

import numpy as np


def euclidean(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sqrt(np.sum((np.asarray(a, float) - np.asarray(b, float)) ** 2)))


def dtw_distance(a, b) -> float:
    """Classic DTW: Euclidean local cost, steps (1,0), (0,1), (1,1), no band, no normalization."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    if len(a) == 0 or len(b) == 0:
        raise ValueError("DTW of an empty sequence")
    if a.shape[1] != b.shape[1]:
        raise ValueError("DTW sequences differ in dimensionality")
    cost = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2))
    n, m = cost.shape
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            acc[i, j] = cost[i - 1, j - 1] + min(acc[i - 1, j - 1], acc[i - 1, j], acc[i, j - 1])
    return float(acc[n, m])


def vote(dists, labels, k: int) -> int:
    """Plurality of the k nearest; ties go to the smaller summed distance, then label 0.

    Neighbours are ranked by (distance, label) so equal distances resolve deterministically.
    """
    dists = np.asarray(dists, dtype=float)
    labels = np.asarray(labels, dtype=np.int64)
    if len(dists) == 0:
        raise ValueError("empty training set")
    if not 1 <= k <= len(dists):
        raise ValueError(f"k={k} outside [1, {len(dists)}]")
    order = np.lexsort((labels, dists))[:k]
    near_d, near_y = dists[order], labels[order]
    counts = [int(np.sum(near_y == c)) for c in (0, 1)]
    if counts[0] != counts[1]:
        return int(np.argmax(counts))
    sums = [float(near_d[near_y == c].sum()) for c in (0, 1)]
    return 1 if sums[1] < sums[0] else 0


def knn_predict(train_x, train_y, query, k: int) -> int:
    train_x = np.asarray(train_x, dtype=float)
    if train_x.size == 0:
        raise ValueError("empty training set")
    d = np.sqrt(((train_x - np.asarray(query, float)[None]) ** 2).sum(axis=1))
    return vote(d, train_y, k)


def dtw_knn_predict(train_seqs, train_y, query, k: int) -> int:
    if len(train_seqs) == 0:
        raise ValueError("empty training set")
    d = [dtw_distance(s, query) for s in train_seqs]
    return vote(d, train_y, k)
