"""Unsupervised estimation of the anomaly/normal depth boundary.

Two cursors start at both ends of the sorted depth profile and advance
toward each other, each step taken by the cursor with the smaller adjacent
depth gap (both on ties). Where they meet separates the short-path anomaly
cluster from the normal cluster.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forest import ForestConfig, build_forest, forest_depths

_MASK64 = (1 << 64) - 1


@dataclass
class DepthProfile:
    """Sorted multiset of cumulative depths with its provenance."""

    depths: np.ndarray
    source: str = "data_points"  # or "ranges"

    def __post_init__(self):
        d = np.asarray(self.depths, dtype=np.int64).reshape(-1)
        if len(d) == 0:
            raise ValueError("empty profile")
        if np.any(np.diff(d) < 0):
            d = np.sort(d)
        self.depths = d

    def __len__(self):
        return len(self.depths)


@dataclass
class CutoffEstimate:
    cutoff_depth: int
    anomaly_count: int
    meeting_index: int
    low_confidence: bool = False


def _walk_naive(d: np.ndarray) -> int:
    """Reference cursor walk; one comparison per step."""
    lo, hi = 0, len(d) - 1
    while lo + 1 < hi:
        g_lo = d[lo + 1] - d[lo]
        g_hi = d[hi] - d[hi - 1]
        if g_lo <= g_hi:
            lo += 1
        if g_hi <= g_lo:
            hi -= 1
    return lo


def _walk_batched(d: np.ndarray) -> int:
    """Cursor walk skipping runs of equal depths in bulk; same result."""
    lo, hi = 0, len(d) - 1
    while lo + 1 < hi:
        g_lo = d[lo + 1] - d[lo]
        g_hi = d[hi] - d[hi - 1]
        if g_lo == 0 and g_hi == 0:
            # both cursors advance in lockstep while inside equal-value runs
            lo_room = int(np.searchsorted(d, d[lo], side="right")) - 1 - lo
            hi_room = hi - int(np.searchsorted(d, d[hi], side="left"))
            stop = (hi - lo) // 2  # steps until lo+1 >= hi
            k = max(1, min(lo_room, hi_room, stop))
            lo += k
            hi -= k
        elif g_lo == 0:
            lo_room = int(np.searchsorted(d, d[lo], side="right")) - 1 - lo
            k = max(1, min(lo_room, hi - lo - 1))
            lo += k
        elif g_hi == 0:
            hi_room = hi - int(np.searchsorted(d, d[hi], side="left"))
            k = max(1, min(hi_room, hi - lo - 1))
            hi -= k
        else:
            if g_lo <= g_hi:
                lo += 1
            if g_hi <= g_lo:
                hi -= 1
    return lo


def greedy_gap_cutoff(profile: DepthProfile) -> CutoffEstimate:
    """Locate the largest separation between anomalous and normal depths.

    The boundary lands after the low cursor's final position, so at least
    one entry is always identified. anomaly_count counts entries up to the
    meeting point; when the meeting falls inside a run of equal depths,
    thresholding data at cutoff_depth can include boundary ties beyond that
    count. Confidence is flagged low when no adjacent gap dominates
    (max gap <= 2x the median gap), including the all-equal case.
    """
    d = profile.depths
    if len(d) < 2:
        raise ValueError("insufficient data")
    lo = _walk_batched(d)
    gaps = np.diff(d)
    low_conf = bool(gaps.max() <= 2 * np.median(gaps))
    return CutoffEstimate(
        cutoff_depth=int(d[lo]),
        anomaly_count=lo + 1,
        meeting_index=lo,
        low_confidence=low_conf,
    )


def profile_from_depths(depths, source: str = "data_points") -> DepthProfile:
    return DepthProfile(np.sort(np.asarray(depths, dtype=np.int64)), source)


def single_estimate(data, config: ForestConfig, source: str = "data_points"):
    """Build a forest and estimate the cutoff in one pass.

    Returns (forest, estimate). With source="ranges" the profile is taken
    from the compiled cover's cells rather than the data points, and the
    anomaly count is re-derived by thresholding the data depths.
    """
    forest = build_forest(data, config)
    depths = forest_depths(forest, data)
    if source == "ranges":
        from .spec import range_profile  # deferred: spec builds on cutoff

        profile = range_profile(forest)
        est = greedy_gap_cutoff(profile)
        count = int(np.count_nonzero(depths <= est.cutoff_depth))
        est = CutoffEstimate(est.cutoff_depth, count, est.meeting_index, est.low_confidence)
    else:
        est = greedy_gap_cutoff(profile_from_depths(depths))
    return forest, est


def run_seeds(seed: int, runs: int) -> list[int]:
    """Deterministic, mutually independent seeds for repeated runs."""
    ss = np.random.SeedSequence([seed & _MASK64, 0x9E3779B97F4A7C15])
    return [int(s) for s in ss.generate_state(runs, dtype=np.uint64)]


def stabilize_estimates(estimates) -> int:
    """Drop the estimate farthest from the mean, average the rest, round."""
    est = np.asarray(estimates, dtype=np.float64)
    if len(est) < 2:
        raise ValueError("insufficient data")
    worst = int(np.argmax(np.abs(est - est.mean())))
    kept = np.delete(est, worst)
    return int(np.floor(kept.mean() + 0.5))


def estimate_anomaly_count_repeated(
    data, config: ForestConfig, runs: int = 5, source: str = "data_points"
) -> int:
    """Stabilised anomaly count over several independently seeded runs."""
    if runs < 2:
        raise ValueError("insufficient data")
    counts = []
    for s in run_seeds(config.rng_seed, runs):
        cfg = ForestConfig(config.tree_count, config.sample_size, s, config.integer_key_mode)
        _, est = single_estimate(data, cfg, source=source)
        counts.append(est.anomaly_count)
    return stabilize_estimates(counts)
