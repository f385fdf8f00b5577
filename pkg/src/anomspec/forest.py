"""Isolation forests over 1-D and n-D data, built by random partitioning.

Trees are grown until every partition holds a single duplicated value group
(no depth cap), splitting on dimensions in cyclic order wherever the current
partition still has spread. A point's path depth is the number of internal
nodes on its root-to-leaf search path, with the root at depth 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_MASK64 = (1 << 64) - 1


class Leaf:
    """Terminal partition; ``depth`` counts internal nodes above it."""

    __slots__ = ("depth",)

    def __init__(self, depth):
        self.depth = depth

    def __repr__(self):
        return f"Leaf(depth={self.depth})"


class Internal:
    """Split node: coordinates < split_value go left, >= go right."""

    __slots__ = ("split_dim", "split_value", "left", "right")

    def __init__(self, split_dim, split_value, left, right):
        self.split_dim = split_dim
        self.split_value = split_value
        self.left = left
        self.right = right

    def __repr__(self):
        return f"Internal(dim={self.split_dim}, split={self.split_value!r})"


@dataclass
class ForestConfig:
    """Training parameters for a forest."""

    tree_count: int = 100
    sample_size: int = 256
    rng_seed: int = 0
    integer_key_mode: bool = False

    def __post_init__(self):
        if self.tree_count < 1:
            raise ValueError("tree_count must be >= 1")
        if self.sample_size < 2:
            raise ValueError("sample_size must be >= 2")


@dataclass
class Forest:
    """A trained isolation forest plus the provenance needed to rebuild it."""

    trees: list
    tree_count: int
    sample_size: int
    dims: int
    seed: int = 0
    integer_keys: bool = False
    _mean_training_depth: float | None = field(default=None, repr=False, compare=False)


def as_points(data) -> np.ndarray:
    """Coerce input to a finite float64 array of shape (n, d)."""
    pts = np.asarray(data, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if pts.ndim != 2:
        raise ValueError(f"points must be 1-D or 2-D, got ndim={pts.ndim}")
    if pts.size and not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    return pts


def tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    """Independent per-tree stream; depends only on (seed, index), not order."""
    return np.random.default_rng(np.random.SeedSequence([seed & _MASK64, tree_index]))


def sample_without_replacement(data, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw min(n, len(data)) rows by index without replacement.

    Duplicate values in the data may still appear more than once in the
    sample; only indices are distinct.
    """
    pts = as_points(data)
    if len(pts) == 0:
        raise ValueError("empty input")
    if n < 1:
        raise ValueError("n must be >= 1")
    k = min(n, len(pts))
    idx = rng.choice(len(pts), size=k, replace=False)
    return pts[idx]


def _draw_split(lo: float, hi: float, rng: np.random.Generator) -> float | None:
    # Need a value strictly inside (lo, hi); uniform() may return lo exactly.
    for _ in range(8):
        s = rng.uniform(lo, hi)
        if lo < s < hi:
            return s
    mid = 0.5 * (lo + hi)
    if lo < mid < hi:
        return mid
    return None


def build_tree(sample, rng: np.random.Generator, dims: int | None = None):
    """Grow one isolation tree over the sampled points.

    Split dimensions cycle in order, skipping dimensions whose values are
    all equal in the current partition; a partition of identical points
    becomes a leaf. Split values are uniform on the open (min, max) interval
    so both children are non-empty. The cycle's starting dimension is drawn
    per tree so the ensemble treats all axes symmetrically.
    """
    pts = as_points(sample)
    if len(pts) == 0:
        raise ValueError("empty input")
    if dims is not None and pts.shape[1] != dims:
        raise ValueError(f"expected {dims} dims, got {pts.shape[1]}")
    d = pts.shape[1]

    # explicit stack, depth-first left-first: same draw order as the
    # obvious recursion, but depth is bounded only by memory
    root_dim = int(rng.integers(0, d)) if d > 1 else 0
    root = None
    stack = [(pts, 0, root_dim, None, False)]
    while stack:
        subset, depth, start_dim, parent, is_left = stack.pop()
        node = None
        for offset in range(d):
            dim = (start_dim + offset) % d
            col = subset[:, dim]
            lo = col.min()
            hi = col.max()
            if lo == hi:
                continue
            split = _draw_split(lo, hi, rng)
            if split is None:
                continue
            mask = col < split
            node = Internal(dim, split, None, None)
            stack.append((subset[~mask], depth + 1, (dim + 1) % d, node, False))
            stack.append((subset[mask], depth + 1, (dim + 1) % d, node, True))
            break
        if node is None:
            node = Leaf(depth)
        if parent is None:
            root = node
        elif is_left:
            parent.left = node
        else:
            parent.right = node
    return root


def build_forest(data, config: ForestConfig) -> Forest:
    """Train ``config.tree_count`` trees, each on an independent sample.

    The result is a pure function of (data, config): per-tree RNG streams are
    derived from the seed and tree index, so trees could be built in any
    order or concurrently with identical output.
    """
    pts = as_points(data)
    if len(pts) == 0:
        raise ValueError("empty input")
    trees = []
    for i in range(config.tree_count):
        rng = tree_rng(config.rng_seed, i)
        sample = sample_without_replacement(pts, config.sample_size, rng)
        tree = build_tree(sample, rng, pts.shape[1])
        if config.integer_key_mode:
            tree = normalize_integer_keys(tree)
        trees.append(tree)
    forest = Forest(
        trees=trees,
        tree_count=config.tree_count,
        sample_size=config.sample_size,
        dims=pts.shape[1],
        seed=config.rng_seed,
        integer_keys=config.integer_key_mode,
    )
    forest._mean_training_depth = float(np.mean(forest_depths(forest, pts)))
    return forest


def path_depth(tree, p) -> int:
    """Depth of the leaf reached when searching for point ``p``."""
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    node = tree
    while isinstance(node, Internal):
        if node.split_dim >= p.shape[0]:
            raise ValueError("point dimensionality below tree dimensionality")
        if p[node.split_dim] < node.split_value:
            node = node.left
        else:
            node = node.right
    return node.depth


def tree_depths(tree, X) -> np.ndarray:
    """Vectorised path_depth for every row of X."""
    pts = as_points(X)
    out = np.zeros(len(pts), dtype=np.int64)
    if len(pts) == 0:
        return out
    stack = [(tree, np.arange(len(pts)))]
    while stack:
        node, idx = stack.pop()
        if isinstance(node, Leaf):
            out[idx] = node.depth
            continue
        if node.split_dim >= pts.shape[1]:
            raise ValueError("point dimensionality below tree dimensionality")
        mask = pts[idx, node.split_dim] < node.split_value
        stack.append((node.left, idx[mask]))
        stack.append((node.right, idx[~mask]))
    return out


def cumulative_depth(forest: Forest, p) -> int:
    """Sum of path depths over every tree in the forest."""
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    if p.shape[0] != forest.dims:
        raise ValueError(f"point has {p.shape[0]} dims, forest has {forest.dims}")
    return sum(path_depth(t, p) for t in forest.trees)


def forest_depths(forest: Forest, X) -> np.ndarray:
    """Vectorised cumulative_depth for every row of X."""
    pts = as_points(X)
    if pts.shape[1] != forest.dims:
        raise ValueError(f"points have {pts.shape[1]} dims, forest has {forest.dims}")
    out = np.zeros(len(pts), dtype=np.int64)
    for tree in forest.trees:
        out += tree_depths(tree, pts)
    return out


def normalize_integer_keys(tree):
    """Rewrite every split value as ceil(value) - 0.5.

    For integer-coordinate data this leaves the partition membership of
    every point unchanged (integers < s are exactly the integers
    < ceil(s) - 0.5) while collapsing distinct split keys drawn between the
    same pair of integers onto one half-integer boundary.
    """
    root = None
    stack = [(tree, None, False)]
    while stack:
        node, parent, is_left = stack.pop()
        if isinstance(node, Leaf):
            copy = Leaf(node.depth)
        else:
            copy = Internal(node.split_dim, math.ceil(node.split_value) - 0.5, None, None)
            stack.append((node.right, copy, False))
            stack.append((node.left, copy, True))
        if parent is None:
            root = copy
        elif is_left:
            parent.left = copy
        else:
            parent.right = copy
    return root


def iter_nodes(tree):
    """Yield every node (internal and leaf) in preorder."""
    stack = [tree]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, Internal):
            stack.append(node.right)
            stack.append(node.left)


def leaf_count(tree) -> int:
    return sum(1 for n in iter_nodes(tree) if isinstance(n, Leaf))


def mean_training_depth(forest: Forest) -> float:
    """Average cumulative depth of the training data, recorded at build time."""
    if forest._mean_training_depth is None:
        raise ValueError("forest carries no recorded training depth")
    return forest._mean_training_depth
