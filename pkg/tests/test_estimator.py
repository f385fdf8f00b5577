"""The scikit-learn estimator facade."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from anomspec.datagen import gen_experiment
from anomspec.estimator import SpecifiedIsolationForest
from anomspec.spec import IntractableDimensionalityError


@pytest.fixture(scope="module")
def exp1_small():
    return gen_experiment(1, 1200, 0.01, seed=21)


class TestSklearnProtocol:
    def test_get_set_params_roundtrip(self):
        est = SpecifiedIsolationForest(n_estimators=7, max_samples=32, random_state=5)
        params = est.get_params()
        assert params["n_estimators"] == 7
        again = SpecifiedIsolationForest(**params)
        assert again.get_params() == params

    def test_clone(self):
        est = SpecifiedIsolationForest(n_estimators=3, max_samples=16)
        cloned = clone(est)
        assert cloned.get_params() == est.get_params()

    def test_not_fitted(self):
        est = SpecifiedIsolationForest()
        with pytest.raises(NotFittedError):
            est.predict(np.zeros((3, 1)))

    def test_feature_count_checked(self, exp1_small):
        est = SpecifiedIsolationForest(n_estimators=5, max_samples=32).fit(exp1_small.points)
        with pytest.raises(ValueError, match="features"):
            est.predict(np.zeros((3, 2)))


class TestFitPredict:
    def test_fit_sets_attributes(self, exp1_small):
        est = SpecifiedIsolationForest(n_estimators=20, max_samples=128, random_state=1)
        est.fit(exp1_small.points)
        assert est.n_features_in_ == 1
        assert est.cutoff_ == est.spec_.cutoff_depth
        assert est.anomaly_count_ >= 1

    def test_predict_signs(self, exp1_small):
        est = SpecifiedIsolationForest(n_estimators=20, max_samples=128, random_state=1)
        labels = est.fit(exp1_small.points).predict(exp1_small.points)
        assert set(np.unique(labels)) <= {-1, 1}
        assert np.count_nonzero(labels == -1) == est.anomaly_count_

    def test_prediction_consistent_with_scores(self, exp1_small):
        est = SpecifiedIsolationForest(n_estimators=20, max_samples=128, random_state=1)
        est.fit(exp1_small.points)
        rng = np.random.default_rng(0)
        probes = rng.uniform(-2, 2, (20_000, 1))
        pred = est.predict(probes)
        direct = est.score_samples(probes) <= est.cutoff_
        assert np.array_equal(pred == -1, direct)
        df = est.decision_function(probes)
        assert np.array_equal(df < 0, direct)

    def test_fit_predict_deterministic(self, exp1_small):
        est = SpecifiedIsolationForest(n_estimators=10, max_samples=64, random_state=3)
        a = est.fit_predict(exp1_small.points)
        b = est.fit(exp1_small.points).predict(exp1_small.points)
        assert np.array_equal(a, b)

    def test_supplied_cutoff_used(self, exp1_small):
        est = SpecifiedIsolationForest(
            n_estimators=10, max_samples=64, cutoff=17, random_state=3
        )
        est.fit(exp1_small.points)
        assert est.cutoff_ == 17

    def test_2d_fit(self):
        ds = gen_experiment(3, 800, 0.01, seed=9)
        est = SpecifiedIsolationForest(n_estimators=15, max_samples=64, random_state=2)
        labels = est.fit_predict(ds.points)
        assert labels.shape == (800,)

    def test_ranges_profile_source(self, exp1_small):
        est = SpecifiedIsolationForest(
            n_estimators=10, max_samples=64, profile_source="ranges", random_state=3
        )
        est.fit(exp1_small.points)
        assert est.cutoff_ >= 0

    def test_high_dims_guarded(self):
        rng = np.random.default_rng(9)
        X = rng.uniform(0, 1, (150, 4))
        est = SpecifiedIsolationForest(n_estimators=2, max_samples=8, random_state=1)
        with pytest.raises(IntractableDimensionalityError):
            est.fit(X)
        forced = SpecifiedIsolationForest(
            n_estimators=2, max_samples=8, force_dims=True, random_state=1
        )
        labels = forced.fit_predict(X)
        assert labels.shape == (150,)

    def test_random_state_none_still_fits(self, exp1_small):
        est = SpecifiedIsolationForest(n_estimators=5, max_samples=32, random_state=None)
        est.fit(exp1_small.points)
        assert hasattr(est, "spec_")

    def test_sklearn_estimator_checks(self):
        # the only tolerated failures are the deliberate refusal to compile
        # specifications beyond 3 dimensions (the checks fit 4-feature data)
        from sklearn.utils.estimator_checks import check_estimator

        est = SpecifiedIsolationForest(n_estimators=5, max_samples=16)
        results = check_estimator(est, on_fail=None)
        unexpected = [
            r
            for r in results
            if r["status"] == "failed"
            and "intractable dimensionality" not in str(r.get("exception"))
            and "IntractableDimensionalityError" not in str(r.get("exception"))
        ]
        assert unexpected == [], unexpected
