"""1-D range lists: tree leaves as contiguous covers of the real line.

A range list partitions (-inf, +inf) into half-open [start, end) intervals,
each carrying a cumulative search depth. Lists from all trees of a forest
merge into a single cover whose depth function equals direct forest scoring
exactly (integer equality), from which anomalous ranges are extracted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forest import Internal, Leaf

INF = float("inf")


@dataclass(frozen=True)
class Range:
    """Half-open interval [start, end) with a cumulative depth."""

    start: float
    end: float
    depth: int

    def __post_init__(self):
        if not self.start < self.end:
            raise ValueError(f"empty range [{self.start}, {self.end})")


class RangeList:
    """Contiguous, non-overlapping cover of the real line.

    Stored as the sorted interior boundaries plus one depth per cell; cell i
    spans [bounds[i-1], bounds[i]) with -inf/+inf at the outer edges.
    """

    def __init__(self, interior_bounds, depths):
        self.bounds = np.asarray(interior_bounds, dtype=np.float64)
        self.depths = np.asarray(depths, dtype=np.int64)
        if self.bounds.ndim != 1 or self.depths.ndim != 1:
            raise ValueError("bounds and depths must be 1-D")
        if len(self.depths) != len(self.bounds) + 1:
            raise ValueError("need exactly one more depth than boundary")
        if len(self.bounds) and not np.all(np.diff(self.bounds) > 0):
            raise ValueError("boundaries must be strictly increasing")
        if len(self.bounds) and not np.all(np.isfinite(self.bounds)):
            raise ValueError("interior boundaries must be finite")

    def __len__(self):
        return len(self.depths)

    def __iter__(self):
        edges = self.edges()
        for i, d in enumerate(self.depths):
            yield Range(edges[i], edges[i + 1], int(d))

    def edges(self) -> np.ndarray:
        return np.concatenate(([-INF], self.bounds, [INF]))

    def depth_at(self, x) -> np.ndarray | int:
        """Depth of the cell containing x (scalar or array)."""
        idx = np.searchsorted(self.bounds, x, side="right")
        out = self.depths[idx]
        return int(out) if np.isscalar(x) else out


@dataclass
class AnomalyRangeSet:
    """Disjoint anomalous ranges at or below a cutoff depth, coalesced."""

    ranges: list[Range]
    cutoff_depth: int


def tree_to_ranges(tree) -> RangeList:
    """In-order leaf ranges of a 1-D tree; one range per leaf."""
    bounds = []
    depths = []
    stack = [(tree, False)]
    while stack:
        node, emit = stack.pop()
        if emit:
            bounds.append(node.split_value)
            continue
        if isinstance(node, Leaf):
            depths.append(node.depth)
            continue
        if node.split_dim != 0:
            raise ValueError("tree is not 1-dimensional")
        stack.append((node.right, False))
        stack.append((node, True))
        stack.append((node.left, False))
    return RangeList(bounds, depths)


def merge_range_lists(lists) -> RangeList:
    """Intersect contiguous covers, summing depths over each refined cell.

    Output boundaries are the sorted union of all input boundaries (duplicates
    collapse, so zero-width cells never appear); each output cell's depth is
    the sum of the containing input cells' depths. Cells are matched by
    boundary value, never by midpoint arithmetic, so the result is exact.
    """
    lists = list(lists)
    if not lists:
        raise ValueError("nothing to merge")
    if len(lists) == 1:
        src = lists[0]
        return RangeList(src.bounds.copy(), src.depths.copy())
    all_bounds = np.unique(np.concatenate([l.bounds for l in lists]))
    left_edges = np.concatenate(([-INF], all_bounds))
    total = np.zeros(len(left_edges), dtype=np.int64)
    for l in lists:
        total += l.depths[np.searchsorted(l.bounds, left_edges, side="right")]
    return RangeList(all_bounds, total)


def extract_anomalous_ranges(merged: RangeList, cutoff: int) -> AnomalyRangeSet:
    """Ranges with depth <= cutoff, adjacent selections coalesced."""
    mask = merged.depths <= cutoff
    edges = merged.edges()
    ranges = []
    i = 0
    m = len(mask)
    while i < m:
        if not mask[i]:
            i += 1
            continue
        j = i
        while j + 1 < m and mask[j + 1]:
            j += 1
        depth = int(merged.depths[i : j + 1].max())
        ranges.append(Range(edges[i], edges[j + 1], depth))
        i = j + 1
    return AnomalyRangeSet(ranges, int(cutoff))


class RangeSearchTree:
    """O(log m) membership over disjoint ordered ranges.

    Bisection over the sorted start points; answers agree with a linear scan
    of the ranges. Start points are inclusive, end points exclusive.
    """

    def __init__(self, ranges):
        rs = sorted(ranges, key=lambda r: r.start)
        self.starts = np.array([r.start for r in rs], dtype=np.float64)
        self.ends = np.array([r.end for r in rs], dtype=np.float64)

    def __len__(self):
        return len(self.starts)

    def contains(self, x) -> bool:
        i = int(np.searchsorted(self.starts, x, side="right")) - 1
        return i >= 0 and x < self.ends[i]

    def contains_many(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.float64)
        idx = np.searchsorted(self.starts, xs, side="right") - 1
        ok = idx >= 0
        out = np.zeros(xs.shape, dtype=bool)
        out[ok] = xs[ok] < self.ends[idx[ok]]
        return out


def ranges_to_search_tree(anoms: AnomalyRangeSet | list) -> RangeSearchTree:
    ranges = anoms.ranges if isinstance(anoms, AnomalyRangeSet) else anoms
    return RangeSearchTree(ranges)
