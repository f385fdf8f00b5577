"""n-D region machinery: KD leaves as hyper-rectangles, pixelation, pruning.

A cell's cumulative depth is the sum, over all trees, of the depth stored in
the one leaf box covering it, so the whole grid reduces to a depth-weighted
box-coverage sum. Cells are swept one row at a time (all dims fixed except
the last) with a running difference array, which keeps memory flat
regardless of grid size.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .forest import Forest, Internal, Leaf, as_points, forest_depths, mean_training_depth

INF = float("inf")

# Dense-mask consolidation and full-matrix materialisation are desk-scale
# tools; past these limits the streaming/run-based paths take over.
MAX_DENSE_CELLS = 4_000_000
MAX_MATRIX_CELLS = 50_000_000


@dataclass(frozen=True)
class HyperRect:
    """Axis-aligned box, half-open [lo_k, hi_k) per dimension."""

    lo: tuple
    hi: tuple
    depth: int = 0

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("lo/hi dimensionality mismatch")
        for a, b in zip(self.lo, self.hi):
            if not a < b:
                raise ValueError(f"empty extent [{a}, {b})")

    @property
    def dims(self):
        return len(self.lo)

    def contains(self, p) -> bool:
        return all(a <= x < b for a, x, b in zip(self.lo, p, self.hi))


class RegionSet:
    """Collection of axis-aligned boxes stored columnar for vector queries."""

    def __init__(self, los, his, depths=None):
        los = np.asarray(los, dtype=np.float64)
        his = np.asarray(his, dtype=np.float64)
        if los.ndim == 1:
            los = los.reshape(1, -1) if los.size else los.reshape(0, 1)
        if his.ndim == 1:
            his = his.reshape(1, -1) if his.size else his.reshape(0, 1)
        self.los = los
        self.his = his
        if self.los.shape != self.his.shape:
            raise ValueError("lo/hi shape mismatch")
        if depths is None:
            depths = np.zeros(len(self.los), dtype=np.int64)
        self.depths = np.asarray(depths, dtype=np.int64).reshape(-1)
        if len(self.depths) != len(self.los):
            raise ValueError("depth count mismatch")
        if np.any(self.los >= self.his):
            raise ValueError("every box needs lo < hi per dimension")

    @classmethod
    def from_rects(cls, rects, dims=None):
        rects = list(rects)
        if not rects:
            d = 1 if dims is None else dims
            return cls(np.empty((0, d)), np.empty((0, d)))
        los = [r.lo for r in rects]
        his = [r.hi for r in rects]
        depths = [r.depth for r in rects]
        return cls(los, his, depths)

    @property
    def dims(self):
        return self.los.shape[1]

    def __len__(self):
        return len(self.los)

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, i) -> HyperRect:
        return HyperRect(tuple(self.los[i]), tuple(self.his[i]), int(self.depths[i]))

    def count_containing(self, X) -> np.ndarray:
        """How many boxes contain each point (0 or 1 when disjoint)."""
        pts = as_points(X)
        out = np.zeros(len(pts), dtype=np.int64)
        for i in range(len(self)):
            inside = np.all((pts >= self.los[i]) & (pts < self.his[i]), axis=1)
            out += inside
        return out

    def contains_points(self, X) -> np.ndarray:
        return self.count_containing(X) > 0


def tree_to_rects(tree, dims: int) -> RegionSet:
    """One box per leaf; the set tiles all of R^dims without overlap."""
    los, his, depths = [], [], []

    def walk(node, lo, hi):
        if isinstance(node, Leaf):
            los.append(tuple(lo))
            his.append(tuple(hi))
            depths.append(node.depth)
            return
        k, s = node.split_dim, node.split_value
        if k >= dims:
            raise ValueError("tree splits beyond requested dimensionality")
        left_hi = list(hi)
        left_hi[k] = s
        right_lo = list(lo)
        right_lo[k] = s
        walk(node.left, lo, left_hi)
        walk(node.right, right_lo, hi)

    walk(tree, [-INF] * dims, [INF] * dims)
    return RegionSet(los, his, depths)


# ---------------------------------------------------------------------------
# Pixel grid
# ---------------------------------------------------------------------------


@dataclass
class PixelGrid:
    """Per-dimension boundary vectors plus (optionally) a cell depth matrix.

    Cell i along a dimension spans [boundary[i-1], boundary[i]) with the
    outermost cells extending to -inf/+inf. ``merged`` records that thin-cell
    merging dropped boundaries, in which case cell depths are the depth of a
    representative point (an approximation); unmerged depths are exact for
    every point of the cell.
    """

    boundaries: list
    depths: np.ndarray | None = None
    merged: bool = False
    _dims: int = field(init=False)

    def __post_init__(self):
        self.boundaries = [np.asarray(b, dtype=np.float64).reshape(-1) for b in self.boundaries]
        for b in self.boundaries:
            if len(b) and (not np.all(np.isfinite(b)) or np.any(np.diff(b) <= 0)):
                raise ValueError("boundaries must be finite and strictly increasing")
        self._dims = len(self.boundaries)

    @property
    def dims(self):
        return self._dims

    @property
    def shape(self):
        return tuple(len(b) + 1 for b in self.boundaries)

    @property
    def cell_count(self):
        n = 1
        for s in self.shape:
            n *= s
        return n

    def edges(self, k) -> np.ndarray:
        return np.concatenate(([-INF], self.boundaries[k], [INF]))

    def representatives(self, k) -> np.ndarray:
        """One interior point per cell along dimension k."""
        b = self.boundaries[k]
        if len(b) == 0:
            return np.array([0.0])
        mids = 0.5 * (b[:-1] + b[1:])
        # guard against midpoints rounding up onto the right edge
        bad = mids >= b[1:]
        mids[bad] = b[:-1][bad]
        return np.concatenate(([b[0] - 1.0], mids, [b[-1] + 1.0]))

    def cell_rect(self, idx, depth=0) -> HyperRect:
        lo = []
        hi = []
        for k, i in enumerate(idx):
            e = self.edges(k)
            lo.append(e[i])
            hi.append(e[i + 1])
        return HyperRect(tuple(lo), tuple(hi), depth)


def split_boundaries(forest: Forest) -> list:
    """Sorted distinct split values per dimension across the whole forest."""
    per_dim = [[] for _ in range(forest.dims)]
    for tree in forest.trees:
        stack = [tree]
        while stack:
            node = stack.pop()
            if isinstance(node, Internal):
                per_dim[node.split_dim].append(node.split_value)
                stack.append(node.left)
                stack.append(node.right)
    return [np.unique(np.asarray(v, dtype=np.float64)) for v in per_dim]


def _thin_merge(bounds: np.ndarray, min_cell: float) -> np.ndarray:
    if min_cell <= 0 or len(bounds) == 0:
        return bounds
    kept = [bounds[0]]
    for b in bounds[1:]:
        if b - kept[-1] >= min_cell:
            kept.append(b)
    return np.asarray(kept)


def build_pixel_grid(forest: Forest, min_cell=0.0) -> PixelGrid:
    """Boundary vectors from all finite split values, optionally thinned.

    Cells narrower than ``min_cell`` (scalar or per-dimension) are absorbed
    into the following cell by dropping their right boundary; the outermost
    unbounded cells are never considered thin.
    """
    if forest.dims < 2:
        raise ValueError("pixel grids require an n-D forest")
    raw = split_boundaries(forest)
    cells = np.broadcast_to(np.asarray(min_cell, dtype=np.float64), (forest.dims,))
    merged_any = False
    bounds = []
    for k in range(forest.dims):
        b = _thin_merge(raw[k], float(cells[k]))
        merged_any = merged_any or len(b) != len(raw[k])
        bounds.append(b)
    return PixelGrid(bounds, merged=merged_any)


def _leaf_boxes(forest: Forest, grid: PixelGrid):
    """Leaf regions as half-open cell-index ranges with their depths.

    Only valid on an unmerged grid, where every split value appears in its
    dimension's boundary vector and index lookups are exact. Summing the
    covering leaves' depths over the forest gives each cell's cumulative
    depth; this also holds for pruned trees, whose collapsed leaves may carry
    a depth larger than their path length.
    """
    d = forest.dims
    shape = grid.shape
    b0, b1, weights = [], [], []

    for tree in forest.trees:
        stack = [(tree, [0] * d, list(shape))]
        while stack:
            node, lo, hi = stack.pop()
            if isinstance(node, Leaf):
                if node.depth:
                    b0.append(lo)
                    b1.append(hi)
                    weights.append(node.depth)
                continue
            k, s = node.split_dim, node.split_value
            m = int(np.searchsorted(grid.boundaries[k], s, side="right"))
            left_hi = list(hi)
            left_hi[k] = m
            right_lo = list(lo)
            right_lo[k] = m
            stack.append((node.left, lo, left_hi))
            stack.append((node.right, right_lo, hi))

    if not b0:
        return (
            np.empty((0, d), dtype=np.int64),
            np.empty((0, d), dtype=np.int64),
            np.empty(0, dtype=np.int64),
        )
    return (
        np.asarray(b0, dtype=np.int64),
        np.asarray(b1, dtype=np.int64),
        np.asarray(weights, dtype=np.int64),
    )


def _bucket(ids, keys, n):
    buckets = [[] for _ in range(n + 1)]
    for i, k in zip(ids.tolist(), keys.tolist()):
        if k <= n:
            buckets[k].append(i)
    return buckets


def sweep_rows(forest: Forest, grid: PixelGrid):
    """Yield (row_index_tuple, depth_vector) for every row of the grid.

    A row fixes the cell index on every dimension but the last; the vector
    holds the exact cumulative depth of each cell along the last dimension.
    Requires an unmerged grid.
    """
    if grid.merged:
        raise ValueError("sweep requires the unmerged grid")
    d = grid.dims
    shape = grid.shape
    b0, b1, weights = _leaf_boxes(forest, grid)
    last = shape[-1]

    def level(k, ids, prefix):
        if k == d - 2:
            diff = np.zeros(last + 1, dtype=np.int64)
            add_at = _bucket(ids, b0[ids, k], shape[k] - 1)
            rem_at = _bucket(ids, b1[ids, k], shape[k] - 1)
            z0 = b0[:, d - 1]
            z1 = b1[:, d - 1]
            for i in range(shape[k]):
                for b in add_at[i]:
                    w = weights[b]
                    diff[z0[b]] += w
                    diff[z1[b]] -= w
                for b in rem_at[i]:
                    w = weights[b]
                    diff[z0[b]] -= w
                    diff[z1[b]] += w
                yield prefix + (i,), np.cumsum(diff[:last])
        else:
            for i in range(shape[k]):
                sel = ids[(b0[ids, k] <= i) & (b1[ids, k] > i)]
                yield from level(k + 1, sel, prefix + (i,))

    all_ids = np.arange(len(b0))
    if d == 1:
        raise ValueError("1-D data uses range lists, not pixel grids")
    yield from level(0, all_ids, ())


def compute_cell_depths(grid: PixelGrid, forest: Forest) -> PixelGrid:
    """Fill the grid's depth matrix.

    On an unmerged grid every cell's depth equals the cumulative depth of
    every point inside it (a depth-weighted leaf-coverage sum); on a merged
    grid each cell gets the depth of its representative point.
    """
    if grid.cell_count > MAX_MATRIX_CELLS:
        raise ValueError(
            f"grid has {grid.cell_count} cells; materialising the matrix is "
            "intractable, use the streaming pipeline"
        )
    shape = grid.shape
    if grid.merged:
        depths = _representative_depths(grid, forest)
    else:
        depths = np.zeros(shape, dtype=np.int64)
        for prefix, vec in sweep_rows(forest, grid):
            depths[prefix] = vec
    return PixelGrid([b.copy() for b in grid.boundaries], depths=depths, merged=grid.merged)


def _representative_depths(grid: PixelGrid, forest: Forest) -> np.ndarray:
    reps = [grid.representatives(k) for k in range(grid.dims)]
    shape = grid.shape
    out = np.zeros(shape, dtype=np.int64)
    row_dims = shape[:-1]
    cols = reps[-1]
    row_pts = np.empty((len(cols), grid.dims))
    row_pts[:, -1] = cols
    for idx in np.ndindex(*row_dims) if row_dims else [()]:
        for k, i in enumerate(idx):
            row_pts[:, k] = reps[k][i]
        out[idx] = forest_depths(forest, row_pts)
    return out


def extract_anomalous_cells(grid: PixelGrid, cutoff: int) -> RegionSet:
    """Every cell with depth <= cutoff, one box per cell."""
    if grid.depths is None:
        raise ValueError("grid has no computed depths")
    hits = np.argwhere(grid.depths <= cutoff)
    los, his, depths = [], [], []
    edges = [grid.edges(k) for k in range(grid.dims)]
    for idx in hits:
        los.append([edges[k][i] for k, i in enumerate(idx)])
        his.append([edges[k][i + 1] for k, i in enumerate(idx)])
        depths.append(grid.depths[tuple(idx)])
    if not los:
        return RegionSet(np.empty((0, grid.dims)), np.empty((0, grid.dims)))
    return RegionSet(los, his, depths)


def anomalous_runs(forest: Forest, grid: PixelGrid, cutoff: int):
    """Anomalous cells as per-row runs along the last dimension.

    Returns (prefixes, z0, z1, run_depths): row index tuples, half-open cell
    ranges, and the max depth within each run. Streaming equivalent of
    extract_anomalous_cells on the unmerged grid.
    """
    prefixes, z0s, z1s, deps = [], [], [], []
    for prefix, vec in sweep_rows(forest, grid):
        mask = vec <= cutoff
        if not mask.any():
            continue
        padded = np.concatenate(([False], mask, [False]))
        flips = np.flatnonzero(padded[1:] != padded[:-1])
        for a, b in zip(flips[::2], flips[1::2]):
            prefixes.append(prefix)
            z0s.append(int(a))
            z1s.append(int(b))
            deps.append(int(vec[a:b].max()))
    if not prefixes:
        d = grid.dims
        return (
            np.empty((0, d - 1), dtype=np.int64),
            np.empty(0, dtype=np.int64),
            np.empty(0, dtype=np.int64),
            np.empty(0, dtype=np.int64),
        )
    return (
        np.asarray(prefixes, dtype=np.int64),
        np.asarray(z0s, dtype=np.int64),
        np.asarray(z1s, dtype=np.int64),
        np.asarray(deps, dtype=np.int64),
    )


def runs_to_boxes(grid: PixelGrid, prefixes, z0, z1, run_depths) -> RegionSet:
    """Merge per-row runs into boxes (face merges only; union preserved)."""
    d = grid.dims
    if len(prefixes) == 0:
        return RegionSet(np.empty((0, d)), np.empty((0, d)))
    # rows arrive in odometer order: merge consecutive rows along dim d-2
    # that share every other coordinate and the same run extent
    boxes = []  # [lo_idx(d), hi_idx(d), depth]
    open_by_key = {}
    for row in range(len(prefixes)):
        pre = tuple(prefixes[row])
        key = (pre[:-1], int(z0[row]), int(z1[row]))
        i = pre[-1]
        prev = open_by_key.get(key)
        if prev is not None and boxes[prev][1][d - 2] == i:
            boxes[prev][1][d - 2] = i + 1
            boxes[prev][2] = max(boxes[prev][2], int(run_depths[row]))
        else:
            lo = list(pre) + [int(z0[row])]
            hi = [p + 1 for p in pre] + [int(z1[row])]
            hi[d - 2] = i + 1
            boxes.append([lo, hi, int(run_depths[row])])
            open_by_key[key] = len(boxes) - 1

    edges = [grid.edges(k) for k in range(d)]
    los = np.array([[edges[k][b[0][k]] for k in range(d)] for b in boxes])
    his = np.array([[edges[k][b[1][k]] for k in range(d)] for b in boxes])
    deps = np.array([b[2] for b in boxes], dtype=np.int64)
    los, his, deps = _face_merge(los, his, deps)
    return RegionSet(los, his, deps)


def _face_merge(los, his, depths):
    """Repeatedly merge boxes that share a full face; exact float matching."""
    d = los.shape[1]
    changed = True
    while changed and len(los) > 1:
        changed = False
        for k in range(d):
            other = [c for c in range(d) if c != k]
            keys = [tuple(los[i, other]) + tuple(his[i, other]) for i in range(len(los))]
            order = sorted(range(len(los)), key=lambda i: (keys[i], los[i, k]))
            keep_lo, keep_hi, keep_dep = [], [], []
            i = 0
            while i < len(order):
                a = order[i]
                lo, hi, dep = los[a].copy(), his[a].copy(), depths[a]
                j = i + 1
                while j < len(order) and keys[order[j]] == keys[a] and los[order[j], k] == hi[k]:
                    hi[k] = his[order[j], k]
                    dep = max(dep, depths[order[j]])
                    j += 1
                if j > i + 1:
                    changed = True
                keep_lo.append(lo)
                keep_hi.append(hi)
                keep_dep.append(dep)
                i = j
            los = np.asarray(keep_lo)
            his = np.asarray(keep_hi)
            depths = np.asarray(keep_dep, dtype=np.int64)
    return los, his, depths


# ---------------------------------------------------------------------------
# Consolidation
# ---------------------------------------------------------------------------


def consolidate_rects(cells: RegionSet) -> RegionSet:
    """Combine grid-aligned anomalous cells into fewer disjoint boxes.

    Greedy pass: repeatedly take the lexicographically smallest unconsumed
    cell, grow the largest hypercube of unconsumed anomalous cells anchored
    there, and consume it; then merge boxes sharing a full face. The covered
    point set is preserved exactly. Inputs whose reconstructed grid exceeds
    the dense-mask budget fall back to face merging alone (same guarantee).
    """
    if len(cells) == 0:
        return RegionSet(np.empty((0, cells.dims)), np.empty((0, cells.dims)))
    d = cells.dims
    edges = []
    for k in range(d):
        edges.append(np.unique(np.concatenate([cells.los[:, k], cells.his[:, k]])))
    shape = tuple(len(e) - 1 for e in edges)
    total = 1
    for s in shape:
        total *= s
    if total > MAX_DENSE_CELLS:
        lo, hi, dep = _face_merge(cells.los.copy(), cells.his.copy(), cells.depths.copy())
        return RegionSet(lo, hi, dep)

    lo_idx = np.stack(
        [np.searchsorted(edges[k], cells.los[:, k]) for k in range(d)], axis=1
    )
    hi_idx = np.stack(
        [np.searchsorted(edges[k], cells.his[:, k]) for k in range(d)], axis=1
    )
    mask = np.zeros(shape, dtype=bool)
    depth_grid = np.zeros(shape, dtype=np.int64)
    for i in range(len(cells)):
        sl = tuple(slice(lo_idx[i, k], hi_idx[i, k]) for k in range(d))
        mask[sl] = True
        depth_grid[sl] = cells.depths[i]

    unconsumed = mask.copy()
    out_lo, out_hi, out_dep = [], [], []
    for origin in np.argwhere(mask):
        o = tuple(origin)
        if not unconsumed[o]:
            continue
        size = 1
        while True:
            if any(origin[k] + size >= shape[k] for k in range(d)):
                break
            sl = tuple(slice(origin[k], origin[k] + size + 1) for k in range(d))
            if not unconsumed[sl].all():
                break
            size += 1
        box = tuple(slice(origin[k], origin[k] + size) for k in range(d))
        unconsumed[box] = False
        out_lo.append([edges[k][origin[k]] for k in range(d)])
        out_hi.append([edges[k][origin[k] + size] for k in range(d)])
        out_dep.append(int(depth_grid[box].max()))

    los, his, deps = _face_merge(
        np.asarray(out_lo), np.asarray(out_hi), np.asarray(out_dep, dtype=np.int64)
    )
    return RegionSet(los, his, deps)


# ---------------------------------------------------------------------------
# Pruning
# ---------------------------------------------------------------------------


def _min_depth_in_rect(node, lo, hi):
    """Smallest leaf depth reachable for points inside the box [lo, hi)."""
    if isinstance(node, Leaf):
        return node.depth
    k, s = node.split_dim, node.split_value
    if hi[k] <= s:
        return _min_depth_in_rect(node.left, lo, hi)
    if lo[k] >= s:
        return _min_depth_in_rect(node.right, lo, hi)
    return min(_min_depth_in_rect(node.left, lo, hi), _min_depth_in_rect(node.right, lo, hi))


def _collapse_uniform(node, depth):
    """Replace subtrees whose leaves all sit at one depth by a single leaf."""
    if isinstance(node, Leaf):
        return node, node.depth, node.depth
    left, lmin, lmax = _collapse_uniform(node.left, depth + 1)
    right, rmin, rmax = _collapse_uniform(node.right, depth + 1)
    dmin, dmax = min(lmin, rmin), max(lmax, rmax)
    if dmin == dmax:
        return Leaf(dmin), dmin, dmax
    return Internal(node.split_dim, node.split_value, left, right), dmin, dmax


def prune_forest(forest: Forest, depth_bound: float | None = None) -> Forest:
    """Collapse subtrees that cannot influence anomaly decisions.

    Uniform-depth subtrees become leaves outright (lossless). A node whose
    own depth plus the minimal depths reachable in every other tree over its
    covering box exceeds ``depth_bound`` also becomes a leaf: no point under
    it can have cumulative depth at or below any cutoff <= depth_bound.
    Because collapses lower the depths other trees see, candidate collapses
    are re-verified against the pruned forest until stable, which keeps
    classification at any cutoff <= depth_bound identical to the original.
    """
    if depth_bound is None:
        depth_bound = mean_training_depth(forest)
    d = forest.dims

    trees = [_collapse_uniform(t, 0)[0] for t in forest.trees]
    originals = list(trees)

    def other_min(exclude, lo, hi, stop_above):
        total = 0
        for j, t in enumerate(trees):
            if j == exclude:
                continue
            total += _min_depth_in_rect(t, lo, hi)
            if total > stop_above:
                return total
        return total

    def prune_tree(idx, node, depth, lo, hi):
        if isinstance(node, Leaf):
            return node
        if depth + other_min(idx, lo, hi, depth_bound - depth) > depth_bound:
            return Leaf(depth)
        k, s = node.split_dim, node.split_value
        left_hi = list(hi)
        left_hi[k] = s
        right_lo = list(lo)
        right_lo[k] = s
        left = prune_tree(idx, node.left, depth + 1, lo, left_hi)
        right = prune_tree(idx, node.right, depth + 1, right_lo, hi)
        if left is node.left and right is node.right:
            return node
        return Internal(k, s, left, right)

    def verify(idx, pruned, original, depth, lo, hi):
        """Restore collapses whose bound no longer holds against the pruned forest."""
        if isinstance(pruned, Leaf):
            if isinstance(original, Leaf):
                return pruned, False
            if depth + other_min(idx, lo, hi, depth_bound - depth) > depth_bound:
                return pruned, False
            return original, True  # undo: support for this collapse eroded
        k, s = pruned.split_dim, pruned.split_value
        left_hi = list(hi)
        left_hi[k] = s
        right_lo = list(lo)
        right_lo[k] = s
        left, c1 = verify(idx, pruned.left, original.left, depth + 1, lo, left_hi)
        right, c2 = verify(idx, pruned.right, original.right, depth + 1, right_lo, hi)
        if c1 or c2:
            return Internal(k, s, left, right), True
        return pruned, False

    full = [-INF] * d, [INF] * d
    for i in range(len(trees)):
        trees[i] = prune_tree(i, trees[i], 0, list(full[0]), list(full[1]))
    for _ in range(len(trees) + 1):
        changed = False
        for i in range(len(trees)):
            trees[i], c = verify(i, trees[i], originals[i], 0, list(full[0]), list(full[1]))
            changed = changed or c
        if not changed:
            break

    pruned = Forest(
        trees=trees,
        tree_count=forest.tree_count,
        sample_size=forest.sample_size,
        dims=forest.dims,
        seed=forest.seed,
        integer_keys=forest.integer_keys,
    )
    pruned._mean_training_depth = forest._mean_training_depth
    return pruned
