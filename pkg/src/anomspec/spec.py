"""The compiled anomaly specification: regions, lookup, and text format.

An AnomalySpec holds the cutoff depth plus the disjoint regions of the data
space a forest would flag at that cutoff. Compiled losslessly (no thin-cell
merging, no pruning bound below the cutoff) it classifies every point
exactly as direct forest scoring does; that equivalence is the artifact's
defining property.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cutoff import CutoffEstimate, DepthProfile
from .forest import Forest, as_points, mean_training_depth
from .ranges import (
    INF,
    Range,
    RangeSearchTree,
    extract_anomalous_ranges,
    merge_range_lists,
    tree_to_ranges,
)
from .regions import (
    RegionSet,
    anomalous_runs,
    build_pixel_grid,
    compute_cell_depths,
    consolidate_rects,
    extract_anomalous_cells,
    prune_forest,
    runs_to_boxes,
    sweep_rows,
)

# Greedy cell consolidation is worthwhile only below this many anomalous
# cells; larger outputs use run/face merging (same covered set either way).
MAX_GREEDY_CELLS = 200_000

MAX_PROFILE_CELLS = 30_000_000


class IntractableDimensionalityError(ValueError):
    """Full specification refused for high-dimensional forests."""


class SpecParseError(ValueError):
    def __init__(self, line_no, message):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


_HEADER_KEYS = ("dims", "cutoff", "seed", "trees", "sample")


@dataclass
class AnomalySpec:
    """Cutoff depth plus disjoint anomalous regions, with provenance."""

    dims: int
    cutoff_depth: int
    regions: RegionSet
    provenance: dict = field(default_factory=dict)
    _index: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.dims < 1:
            raise ValueError("dims must be >= 1")
        if self.regions.dims != self.dims and len(self.regions):
            raise ValueError("region dimensionality mismatch")
        self.provenance = {"seed": 0, "trees": 0, "sample": 0, **self.provenance}
        order = np.lexsort(
            tuple(self.regions.his[:, k] for k in reversed(range(self.regions.dims)))
            + tuple(self.regions.los[:, k] for k in reversed(range(self.regions.dims)))
        )
        self.regions = RegionSet(
            self.regions.los[order], self.regions.his[order], self.regions.depths[order]
        )

    @property
    def ranges(self) -> list[Range]:
        """The regions as 1-D ranges (dims == 1 only)."""
        if self.dims != 1:
            raise ValueError("ranges view requires a 1-D spec")
        return [Range(float(lo[0]), float(hi[0]), int(d))
                for lo, hi, d in zip(self.regions.los, self.regions.his, self.regions.depths)]

    def structurally_equal(self, other) -> bool:
        return (
            self.dims == other.dims
            and self.cutoff_depth == other.cutoff_depth
            and np.array_equal(self.regions.los, other.regions.los)
            and np.array_equal(self.regions.his, other.regions.his)
            and self.provenance == other.provenance
        )


class BoxIndex:
    """Point location over disjoint boxes via recursive median splitting."""

    LEAF_SIZE = 8

    def __init__(self, regions: RegionSet):
        self.regions = regions
        ids = np.arange(len(regions))
        self.root = self._build(ids, 0)

    def _build(self, ids, level):
        if len(ids) <= self.LEAF_SIZE:
            return ("leaf", ids)
        d = self.regions.dims
        for offset in range(d):
            k = (level + offset) % d
            centers = 0.5 * (
                np.clip(self.regions.los[ids, k], -1e300, 1e300)
                + np.clip(self.regions.his[ids, k], -1e300, 1e300)
            )
            split = float(np.median(centers))
            left = ids[self.regions.los[ids, k] < split]
            right = ids[self.regions.his[ids, k] > split]
            # straddling boxes land on both sides; insist on real progress
            if len(left) < len(ids) and len(right) < len(ids):
                return (
                    "node",
                    k,
                    split,
                    self._build(left, level + 1),
                    self._build(right, level + 1),
                )
        return ("leaf", ids)

    def query_many(self, X) -> np.ndarray:
        pts = as_points(X)
        out = np.zeros(len(pts), dtype=bool)
        stack = [(self.root, np.arange(len(pts)))]
        los, his = self.regions.los, self.regions.his
        while stack:
            node, idx = stack.pop()
            if len(idx) == 0:
                continue
            if node[0] == "leaf":
                sub = pts[idx]
                hit = np.zeros(len(idx), dtype=bool)
                for b in node[1]:
                    hit |= np.all((sub >= los[b]) & (sub < his[b]), axis=1)
                out[idx] |= hit
                continue
            _, k, split, left, right = node
            mask = pts[idx, k] < split
            stack.append((left, idx[mask]))
            stack.append((right, idx[~mask]))
        return out

    def query(self, p) -> bool:
        return bool(self.query_many(np.asarray(p, dtype=np.float64).reshape(1, -1))[0])


def _lookup_index(spec: AnomalySpec):
    if spec._index is None:
        if spec.dims == 1:
            spec._index = RangeSearchTree(spec.ranges)
        else:
            spec._index = BoxIndex(spec.regions)
    return spec._index


def classify(spec: AnomalySpec, p) -> bool:
    """True when the point falls in an anomalous region."""
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    if p.shape[0] != spec.dims:
        raise ValueError(f"point has {p.shape[0]} dims, spec has {spec.dims}")
    index = _lookup_index(spec)
    if spec.dims == 1:
        return index.contains(float(p[0]))
    return index.query(p)


def classify_points(spec: AnomalySpec, X) -> np.ndarray:
    """Vectorised classify over rows of X."""
    pts = as_points(X)
    if pts.shape[1] != spec.dims:
        raise ValueError(f"points have {pts.shape[1]} dims, spec has {spec.dims}")
    index = _lookup_index(spec)
    if spec.dims == 1:
        return index.contains_many(pts[:, 0])
    return index.query_many(pts)


def range_profile(forest: Forest) -> DepthProfile:
    """Depth profile over the compiled cover's cells rather than data points."""
    if forest.dims == 1:
        merged = merge_range_lists(tree_to_ranges(t) for t in forest.trees)
        return DepthProfile(np.sort(merged.depths), source="ranges")
    grid = build_pixel_grid(forest)
    if grid.cell_count > MAX_PROFILE_CELLS:
        raise ValueError(
            f"cell profile over {grid.cell_count} cells is intractable; "
            "estimate the cutoff from data points instead"
        )
    chunks = [vec for _, vec in sweep_rows(forest, grid)]
    return DepthProfile(np.sort(np.concatenate(chunks)), source="ranges")


def compile_spec(
    forest: Forest,
    cutoff,
    *,
    min_cell=0.0,
    prune: bool = False,
    force: bool = False,
    provenance: dict | None = None,
) -> AnomalySpec:
    """Compile the forest's anomaly decision rule at the given cutoff.

    1-D forests merge their per-tree range lists; n-D forests run the pixel
    pipeline (grid, cell depths, anomalous cells, consolidation). With
    min_cell == 0 and prune == False the compiled spec classifies every
    point exactly as the forest does.
    """
    if isinstance(cutoff, CutoffEstimate):
        cutoff = cutoff.cutoff_depth
    cutoff = int(cutoff)
    if forest.dims > 3 and not force:
        raise IntractableDimensionalityError("intractable dimensionality")

    meta = {
        "seed": forest.seed,
        "trees": forest.tree_count,
        "sample": forest.sample_size,
    }
    if provenance:
        meta.update(provenance)

    if forest.dims == 1:
        merged = merge_range_lists(tree_to_ranges(t) for t in forest.trees)
        anoms = extract_anomalous_ranges(merged, cutoff)
        if anoms.ranges:
            los = [[r.start] for r in anoms.ranges]
            his = [[r.end] for r in anoms.ranges]
            deps = [r.depth for r in anoms.ranges]
            regions = RegionSet(los, his, deps)
        else:
            regions = RegionSet(np.empty((0, 1)), np.empty((0, 1)))
        return AnomalySpec(1, cutoff, regions, meta)

    work = forest
    if prune:
        bound = max(float(cutoff), mean_training_depth(forest))
        work = prune_forest(forest, bound)
    grid = build_pixel_grid(work, min_cell)
    if grid.merged:
        filled = compute_cell_depths(grid, work)
        cells = extract_anomalous_cells(filled, cutoff)
        regions = consolidate_rects(cells)
    else:
        prefixes, z0, z1, run_depths = anomalous_runs(work, grid, cutoff)
        n_cells = int((z1 - z0).sum())
        if n_cells <= MAX_GREEDY_CELLS:
            cells = _runs_to_unit_cells(grid, prefixes, z0, z1, run_depths)
            regions = consolidate_rects(cells)
        else:
            regions = runs_to_boxes(grid, prefixes, z0, z1, run_depths)
    return AnomalySpec(work.dims, cutoff, regions, meta)


def _runs_to_unit_cells(grid, prefixes, z0, z1, run_depths) -> RegionSet:
    d = grid.dims
    if len(prefixes) == 0:
        return RegionSet(np.empty((0, d)), np.empty((0, d)))
    edges = [grid.edges(k) for k in range(d)]
    los, his, deps = [], [], []
    for r in range(len(prefixes)):
        pre = prefixes[r]
        for z in range(int(z0[r]), int(z1[r])):
            idx = list(pre) + [z]
            los.append([edges[k][idx[k]] for k in range(d)])
            his.append([edges[k][idx[k] + 1] for k in range(d)])
            deps.append(int(run_depths[r]))
    return RegionSet(los, his, deps)


# ---------------------------------------------------------------------------
# Text format
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    if x == INF:
        return "inf"
    if x == -INF:
        return "-inf"
    return repr(float(x))


def serialize_spec(spec: AnomalySpec) -> str:
    """Line-oriented text form; full float precision, byte-stable."""
    lines = [
        f"dims {spec.dims}",
        f"cutoff {spec.cutoff_depth}",
        f"seed {spec.provenance.get('seed', 0)}",
        f"trees {spec.provenance.get('trees', 0)}",
        f"sample {spec.provenance.get('sample', 0)}",
    ]
    for key in sorted(spec.provenance):
        if key in ("seed", "trees", "sample"):
            continue
        lines.append(f"meta {key} {spec.provenance[key]}")
    for i in range(len(spec.regions)):
        parts = []
        for k in range(spec.dims):
            parts.append(_fmt(spec.regions.los[i, k]))
            parts.append(_fmt(spec.regions.his[i, k]))
        lines.append(" ".join(parts))
    return "\n".join(lines) + "\n"


def parse_spec(text: str) -> AnomalySpec:
    """Parse the text form; malformed input reports its line number."""
    header = {}
    meta = {}
    regions_lo, regions_hi = [], []
    dims = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] in _HEADER_KEYS:
            if len(parts) != 2:
                raise SpecParseError(line_no, f"malformed {parts[0]} header")
            try:
                header[parts[0]] = int(parts[1])
            except ValueError:
                raise SpecParseError(line_no, f"{parts[0]} must be an integer") from None
            if parts[0] == "dims":
                dims = header["dims"]
                if dims < 1:
                    raise SpecParseError(line_no, "dims must be >= 1")
            continue
        if parts[0] == "meta":
            if len(parts) < 3:
                raise SpecParseError(line_no, "malformed meta line")
            meta[parts[1]] = " ".join(parts[2:])
            continue
        if dims is None:
            raise SpecParseError(line_no, "region line before dims header")
        if len(parts) != 2 * dims:
            raise SpecParseError(
                line_no, f"expected {2 * dims} endpoints, got {len(parts)}"
            )
        try:
            vals = [float(tok) for tok in parts]
        except ValueError:
            raise SpecParseError(line_no, "unparseable endpoint") from None
        lo = vals[0::2]
        hi = vals[1::2]
        for a, b in zip(lo, hi):
            if not a < b:
                raise SpecParseError(line_no, f"empty extent [{a}, {b})")
            if np.isnan(a) or np.isnan(b):
                raise SpecParseError(line_no, "NaN endpoint")
        regions_lo.append(lo)
        regions_hi.append(hi)

    for key in ("dims", "cutoff"):
        if key not in header:
            raise SpecParseError(0, f"missing {key} header")
    prov = {
        "seed": header.get("seed", 0),
        "trees": header.get("trees", 0),
        "sample": header.get("sample", 0),
    }
    prov.update(meta)
    if regions_lo:
        regions = RegionSet(regions_lo, regions_hi)
    else:
        regions = RegionSet(np.empty((0, header["dims"])), np.empty((0, header["dims"])))
    return AnomalySpec(header["dims"], header["cutoff"], regions, prov)
