"""k-nearest-neighbour density outliers and ranking comparison.

A point's score is max over 1 <= k <= max_k of d_k^2 / k, the inverse of
the population density inside the circle through its k-th nearest
neighbour. Larger scores rank as more significant outliers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .cutoff import greedy_gap_cutoff, profile_from_depths
from .forest import as_points

_CHUNK = 512


@dataclass
class KnnRanking:
    scores: np.ndarray
    order: np.ndarray  # permutation, most significant outlier first
    max_k: int
    argmax_k: np.ndarray  # the k at which each point's score peaks


def knn_rank(data, max_k: int = 200) -> KnnRanking:
    """Exact NN-outlier scores for 2-D data (self excluded from neighbours)."""
    pts = as_points(data)
    if pts.shape[1] != 2:
        raise ValueError("NN-outlier ranking is defined for 2-D data")
    n = len(pts)
    if not 1 <= max_k < n:
        raise ValueError("need 1 <= max_k < number of points")
    ks = np.arange(1, max_k + 1, dtype=np.float64)
    scores = np.empty(n)
    argmax_k = np.empty(n, dtype=np.int64)
    for a in range(0, n, _CHUNK):
        b = min(a + _CHUNK, n)
        dx = pts[a:b, 0][:, None] - pts[None, :, 0]
        dy = pts[a:b, 1][:, None] - pts[None, :, 1]
        d2 = dx * dx + dy * dy
        d2[np.arange(b - a), np.arange(a, b)] = np.inf  # exclude self
        nearest = np.sort(np.partition(d2, max_k - 1, axis=1)[:, :max_k], axis=1)
        ratios = nearest / ks
        scores[a:b] = ratios.max(axis=1)
        argmax_k[a:b] = ratios.argmax(axis=1) + 1
    order = np.lexsort((np.arange(n), -scores))
    return KnnRanking(scores, order, max_k, argmax_k)


def compare_rankings(iforest_depths, knn: KnnRanking, anomaly_count: int | None = None) -> dict:
    """Agreement between forest depth ranking and NN-outlier ranking.

    Pearson's r is computed between the two rank vectors (forest ranked by
    ascending depth, NN by descending score, average ranks on ties). The
    forest's anomaly set is thresholded at the greedy-gap cutoff unless an
    explicit count of smallest-depth points is supplied; the top-m
    NN-outliers are then swept to find the m maximising the f-measure.
    """
    depths = np.asarray(iforest_depths, dtype=np.float64).reshape(-1)
    n = len(depths)
    if n != len(knn.scores):
        raise ValueError("length mismatch")
    r = float(np.corrcoef(rankdata(depths), rankdata(-knn.scores))[0, 1])

    if anomaly_count is None:
        est = greedy_gap_cutoff(profile_from_depths(depths.astype(np.int64)))
        anomalous = depths <= est.cutoff_depth
    else:
        if not 1 <= anomaly_count <= n:
            raise ValueError("anomaly_count out of range")
        keep = np.lexsort((np.arange(n), depths))[:anomaly_count]
        anomalous = np.zeros(n, dtype=bool)
        anomalous[keep] = True
    count = int(anomalous.sum())

    hits = anomalous[knn.order]
    tp = np.cumsum(hits)
    m = np.arange(1, n + 1)
    precision = tp / m
    recall = tp / count
    denom = precision + recall
    f = np.where(denom > 0, 2 * precision * recall / np.maximum(denom, 1e-300), 0.0)
    best = int(np.argmax(f))
    return {
        "pearson_r": r,
        "best_f_measure": float(f[best]),
        "best_m": best + 1,
        "matched": int(tp[best]),
        "anomaly_count": count,
    }
