"""Scikit-learn style estimator wrapping the full specification pipeline."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.base import BaseEstimator, OutlierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .cutoff import greedy_gap_cutoff, profile_from_depths
from .forest import ForestConfig, build_forest, forest_depths
from .spec import classify_points, compile_spec, range_profile


class SpecifiedIsolationForest(OutlierMixin, BaseEstimator):
    """Isolation-forest outlier detector with a compiled region specification.

    Fitting builds the forest, estimates the anomaly cutoff from the sorted
    depth profile (unless one is supplied), and compiles the anomalous data
    space into explicit disjoint regions. Prediction is served from that
    specification and, when compiled losslessly (the default), agrees
    exactly with thresholding the forest's cumulative depths.

    Parameters
    ----------
    n_estimators : int, default=100
        Number of isolation trees.

    max_samples : int, default=256
        Points sampled (without replacement, capped at the dataset size)
        to build each tree.

    cutoff : int or None, default=None
        Cumulative-depth cutoff; points at or below it are anomalous.
        When None the cutoff is estimated by the greedy gap walk.

    profile_source : {"data", "ranges"}, default="data"
        Estimate the cutoff from the training points' depths or from the
        compiled cover's cells.

    min_cell : float, default=0.0
        Thin-cell merging width for n-D grids; non-zero values trade
        exactness for compactness.

    prune : bool, default=False
        Prune subtrees that cannot contain anomalies before compiling.

    integer_keys : bool, default=False
        Normalise split keys to half-integers (integer-valued data only).

    force_dims : bool, default=False
        Compile specifications beyond 3 dimensions anyway; cell counts grow
        as O(c^n), so this is rarely tractable.

    random_state : int or None, default=0
        Seed for sampling and splits. None draws a fresh seed.

    Attributes
    ----------
    forest_ : Forest
        The trained isolation forest.

    spec_ : AnomalySpec
        Compiled anomalous-region specification.

    cutoff_ : int
        The cutoff depth in effect.

    anomaly_count_ : int
        Training points classified anomalous.
    """

    def __init__(
        self,
        n_estimators=100,
        max_samples=256,
        cutoff=None,
        profile_source="data",
        min_cell=0.0,
        prune=False,
        integer_keys=False,
        force_dims=False,
        random_state=0,
    ):
        self.n_estimators = n_estimators
        self.max_samples = max_samples
        self.cutoff = cutoff
        self.profile_source = profile_source
        self.min_cell = min_cell
        self.prune = prune
        self.integer_keys = integer_keys
        self.force_dims = force_dims
        self.random_state = random_state

    def fit(self, X, y=None):
        """Build the forest and compile the anomaly specification."""
        X = check_array(X, ensure_2d=True, ensure_min_samples=2)
        if self.profile_source not in ("data", "ranges"):
            raise ValueError("profile_source must be 'data' or 'ranges'")
        if self.random_state is None:
            seed = int(np.random.SeedSequence().generate_state(1, dtype=np.uint64)[0])
        elif isinstance(self.random_state, numbers.Integral):
            seed = int(self.random_state)
        else:
            raise ValueError("random_state must be an int or None")
        config = ForestConfig(
            tree_count=self.n_estimators,
            sample_size=self.max_samples,
            rng_seed=seed,
            integer_key_mode=self.integer_keys,
        )
        self.forest_ = build_forest(X, config)
        depths = forest_depths(self.forest_, X)
        if self.cutoff is not None:
            self.cutoff_ = int(self.cutoff)
        elif self.profile_source == "ranges":
            self.cutoff_ = greedy_gap_cutoff(range_profile(self.forest_)).cutoff_depth
        else:
            self.cutoff_ = greedy_gap_cutoff(profile_from_depths(depths)).cutoff_depth
        self.spec_ = compile_spec(
            self.forest_,
            self.cutoff_,
            min_cell=self.min_cell,
            prune=self.prune,
            force=self.force_dims,
        )
        self.anomaly_count_ = int(np.count_nonzero(depths <= self.cutoff_))
        # depths are integers and the cutoff is inclusive; the half-unit
        # offset makes decision_function strictly negative iff anomalous
        self.offset_ = float(self.cutoff_) + 0.5
        self.n_features_in_ = X.shape[1]
        return self

    def _validate(self, X):
        check_is_fitted(self, "spec_")
        X = check_array(X, ensure_2d=True)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, estimator was fitted with "
                f"{self.n_features_in_}"
            )
        return X

    def predict(self, X):
        """-1 for points inside an anomalous region, +1 otherwise."""
        X = self._validate(X)
        return np.where(classify_points(self.spec_, X), -1, 1)

    def score_samples(self, X):
        """Cumulative path depth per point; lower means more anomalous."""
        X = self._validate(X)
        return forest_depths(self.forest_, X).astype(np.float64)

    def decision_function(self, X):
        """score_samples minus offset_; strictly negative iff anomalous."""
        return self.score_samples(X) - self.offset_
