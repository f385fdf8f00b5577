"""Evaluation metrics, depth-distribution theory, and series diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .cutoff import single_estimate
from .forest import Forest, ForestConfig, as_points, forest_depths

_MASK64 = (1 << 64) - 1


@dataclass
class EvalReport:
    precision: float
    recall: float
    f_measure: float
    tp: int
    fp: int
    fn: int
    tn: int
    spearman_rho: float | None = None
    pearson_r: float | None = None

    def as_dict(self):
        out = {
            "precision": self.precision,
            "recall": self.recall,
            "f_measure": self.f_measure,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "tn": self.tn,
        }
        if self.spearman_rho is not None:
            out["spearman_rho"] = self.spearman_rho
        if self.pearson_r is not None:
            out["pearson_r"] = self.pearson_r
        return out


def eval_labels(predicted, truth) -> EvalReport:
    """Confusion-matrix metrics of a predicted labelling against truth."""
    pred = np.asarray(predicted, dtype=bool).reshape(-1)
    true = np.asarray(truth, dtype=bool).reshape(-1)
    if len(pred) != len(true):
        raise ValueError("length mismatch")
    tp = int(np.count_nonzero(pred & true))
    fp = int(np.count_nonzero(pred & ~true))
    fn = int(np.count_nonzero(~pred & true))
    tn = int(np.count_nonzero(~pred & ~true))
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return EvalReport(p, r, f, tp, fp, fn, tn)


def pearson_r(a, b) -> float:
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if len(a) != len(b) or len(a) < 2:
        raise ValueError("need two sequences of equal length >= 2")
    return float(np.corrcoef(a, b)[0, 1])


def spearman_rho(a, b) -> float:
    """Rank correlation; ties take average ranks."""
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if len(a) != len(b) or len(a) < 2:
        raise ValueError("need two sequences of equal length >= 2")
    return float(np.corrcoef(rankdata(a), rankdata(b))[0, 1])


def depth_distribution_stats(n: int) -> dict:
    """Closed-form mean and variance of the last-inserted key's depth.

    For an ordered binary tree built from a random permutation of n distinct
    keys: mean = sum_{i=2..n} 2/i, variance = sum_{i=2..n} (2 - 4/i)/i.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    i = np.arange(2, n + 1, dtype=np.float64)
    return {"mean": float((2.0 / i).sum()), "variance": float(((2.0 - 4.0 / i) / i).sum())}


def monte_carlo_last_depth(
    n: int, trials: int, seed: int = 0, distribution: str = "permutation"
) -> dict:
    """Empirical distribution of the last inserted key's depth.

    Rather than building each tree, the depth is counted as the number of
    one-sided prefix records among earlier keys: an earlier key lies on the
    search path of the last key x exactly when it tightens the open interval
    around x, i.e. is a running maximum below x or a running minimum above.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    rng = np.random.default_rng(seed & _MASK64)
    depths = np.empty(trials, dtype=np.int64)
    for t in range(trials):
        if distribution == "permutation":
            vals = rng.permutation(n).astype(np.float64)
        elif distribution == "uniform":
            vals = rng.random(n)
        elif distribution == "exponential":
            vals = rng.exponential(1.0, n)
        else:
            raise ValueError(f"unknown distribution {distribution!r}")
        x = vals[-1]
        rest = vals[:-1]
        below = rest[rest < x]
        above = rest[rest > x]
        d = 0
        if len(below):
            d += int(np.count_nonzero(below == np.maximum.accumulate(below)))
        if len(above):
            d += int(np.count_nonzero(above == np.minimum.accumulate(above)))
        depths[t] = d
    return {
        "mean": float(depths.mean()),
        "variance": float(depths.var(ddof=1)),
        "histogram": np.bincount(depths),
        "depths": depths,
    }


def self_validate(data, config: ForestConfig, seed_a: int, seed_b: int) -> EvalReport:
    """Score one seeded run against another's labels (quasi-ground-truth).

    The first run is the control; the second run's labels are evaluated
    against it, and the rank correlation of the two per-point depth vectors
    is attached to the report.
    """
    pts = as_points(data)
    if len(pts) == 0:
        raise ValueError("empty input")
    cfg_a = ForestConfig(config.tree_count, config.sample_size, seed_a, config.integer_key_mode)
    cfg_b = ForestConfig(config.tree_count, config.sample_size, seed_b, config.integer_key_mode)
    forest_a, est_a = single_estimate(pts, cfg_a)
    forest_b, est_b = single_estimate(pts, cfg_b)
    depths_a = forest_depths(forest_a, pts)
    depths_b = forest_depths(forest_b, pts)
    labels_a = depths_a <= est_a.cutoff_depth
    labels_b = depths_b <= est_b.cutoff_depth
    report = eval_labels(labels_b, labels_a)
    report.spearman_rho = spearman_rho(depths_a, depths_b)
    report.pearson_r = pearson_r(depths_a, depths_b)
    return report


def contour_grid(forest: Forest, data, width: int, height: int) -> np.ndarray:
    """Percentile surface over the data's bounding box plus a 10% margin.

    Cell (j, i) holds the fraction of data points whose cumulative depth is
    strictly below the depth at the cell's centre; row index j runs from low
    to high y. Shape is (height, width).
    """
    if width < 1 or height < 1:
        raise ValueError("grid must be at least 1x1")
    pts = as_points(data)
    if forest.dims != 2 or pts.shape[1] != 2:
        raise ValueError("contour grids are 2-D")
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    lo = lo - 0.1 * span
    hi = hi + 0.1 * span
    xs = lo[0] + (np.arange(width) + 0.5) * (hi[0] - lo[0]) / width
    ys = lo[1] + (np.arange(height) + 0.5) * (hi[1] - lo[1]) / height
    data_depths = np.sort(forest_depths(forest, pts))
    n = len(data_depths)
    out = np.empty((height, width), dtype=np.float64)
    row = np.empty((width, 2))
    row[:, 0] = xs
    for j, y in enumerate(ys):
        row[:, 1] = y
        cell_depths = forest_depths(forest, row)
        out[j] = np.searchsorted(data_depths, cell_depths, side="left") / n
    return out


def _segment_ssr(cum, a, b):
    """Least-squares line residual sum over series[a:b] against x = a..b-1."""
    cx, cxx, cy, cyy, cxy = cum
    m = b - a
    sx = cx[b] - cx[a]
    sxx = cxx[b] - cxx[a]
    sy = cy[b] - cy[a]
    syy = cyy[b] - cyy[a]
    sxy = cxy[b] - cxy[a]
    sxx_c = sxx - sx * sx / m
    sxy_c = sxy - sx * sy / m
    syy_c = syy - sy * sy / m
    return syy_c - (sxy_c * sxy_c) / sxx_c


def least_smooth_split(series) -> int:
    """Index i of the excluded point minimising LSE(v[:i]) + LSE(v[i+1:]).

    Both sides need at least two points, so valid i runs from 2 to n-3.
    Ties resolve to the smallest index.
    """
    v = np.asarray(series, dtype=np.float64).reshape(-1)
    n = len(v)
    if n < 5:
        raise ValueError("series too short")
    x = np.arange(n, dtype=np.float64)
    cum = tuple(
        np.concatenate(([0.0], np.cumsum(arr)))
        for arr in (x, x * x, v, v * v, x * v)
    )
    idx = np.arange(2, n - 2)
    left = np.array([_segment_ssr(cum, 0, i) for i in idx])
    right = np.array([_segment_ssr(cum, i + 1, n) for i in idx])
    total = left + right
    return int(idx[np.argmin(total)])


def anomaly_outlier_overlap(data, forest_labels, k_outliers: int) -> float:
    """Fraction of the k largest global-line residuals flagged anomalous."""
    v = np.asarray(data, dtype=np.float64).reshape(-1)
    labels = np.asarray(forest_labels, dtype=bool).reshape(-1)
    if len(v) != len(labels):
        raise ValueError("length mismatch")
    if not 1 <= k_outliers <= len(v):
        raise ValueError("k_outliers out of range")
    x = np.arange(len(v), dtype=np.float64)
    slope, intercept = np.polyfit(x, v, 1)
    resid = np.abs(v - (slope * x + intercept))
    top = np.argsort(-resid, kind="stable")[:k_outliers]
    return float(np.count_nonzero(labels[top]) / k_outliers)
