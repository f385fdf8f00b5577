"""Isolation-forest anomaly detection with compiled region specifications."""

from .analysis import (
    EvalReport,
    anomaly_outlier_overlap,
    contour_grid,
    depth_distribution_stats,
    eval_labels,
    least_smooth_split,
    monte_carlo_last_depth,
    pearson_r,
    self_validate,
    spearman_rho,
)
from .cutoff import (
    CutoffEstimate,
    DepthProfile,
    estimate_anomaly_count_repeated,
    greedy_gap_cutoff,
    profile_from_depths,
    single_estimate,
)
from .datagen import LabeledDataset, gen_experiment, ingest_ppm, rotate
from .estimator import SpecifiedIsolationForest
from .forest import (
    Forest,
    ForestConfig,
    build_forest,
    build_tree,
    cumulative_depth,
    forest_depths,
    normalize_integer_keys,
    path_depth,
    sample_without_replacement,
    tree_depths,
)
from .knn import KnnRanking, compare_rankings, knn_rank
from .ranges import (
    AnomalyRangeSet,
    Range,
    RangeList,
    RangeSearchTree,
    extract_anomalous_ranges,
    merge_range_lists,
    ranges_to_search_tree,
    tree_to_ranges,
)
from .regions import (
    HyperRect,
    PixelGrid,
    RegionSet,
    build_pixel_grid,
    compute_cell_depths,
    consolidate_rects,
    extract_anomalous_cells,
    prune_forest,
    tree_to_rects,
)
from .spec import (
    AnomalySpec,
    IntractableDimensionalityError,
    SpecParseError,
    classify,
    classify_points,
    compile_spec,
    parse_spec,
    range_profile,
    serialize_spec,
)

__version__ = "0.1.0"

__all__ = [
    "AnomalyRangeSet",
    "AnomalySpec",
    "CutoffEstimate",
    "DepthProfile",
    "EvalReport",
    "Forest",
    "ForestConfig",
    "HyperRect",
    "IntractableDimensionalityError",
    "KnnRanking",
    "LabeledDataset",
    "PixelGrid",
    "Range",
    "RangeList",
    "RangeSearchTree",
    "RegionSet",
    "SpecParseError",
    "SpecifiedIsolationForest",
    "anomaly_outlier_overlap",
    "build_forest",
    "build_pixel_grid",
    "build_tree",
    "classify",
    "classify_points",
    "compare_rankings",
    "compile_spec",
    "compute_cell_depths",
    "consolidate_rects",
    "contour_grid",
    "cumulative_depth",
    "depth_distribution_stats",
    "estimate_anomaly_count_repeated",
    "eval_labels",
    "extract_anomalous_cells",
    "extract_anomalous_ranges",
    "forest_depths",
    "gen_experiment",
    "greedy_gap_cutoff",
    "ingest_ppm",
    "knn_rank",
    "least_smooth_split",
    "merge_range_lists",
    "monte_carlo_last_depth",
    "normalize_integer_keys",
    "parse_spec",
    "path_depth",
    "pearson_r",
    "profile_from_depths",
    "prune_forest",
    "range_profile",
    "ranges_to_search_tree",
    "rotate",
    "sample_without_replacement",
    "self_validate",
    "serialize_spec",
    "single_estimate",
    "spearman_rho",
    "tree_depths",
    "tree_to_ranges",
    "tree_to_rects",
]
