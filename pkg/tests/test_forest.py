import numba
import numpy as np
import pytest

from rpiv.exceptions import DataError
from rpiv.forest import RegressionForest, fit_forest


@pytest.fixture
def features(rng):
    return rng.normal(size=(200, 4))


class TestRegressionForest:
    def test_constant_target(self, features):
        forest = RegressionForest(num_trees=50, seed=1).fit(features, np.full(200, 3.7))
        np.testing.assert_allclose(forest.predict(features[:20]), 3.7, atol=1e-12)
        assert forest.oob_error_ <= 1e-24

    def test_step_function_beats_mean_predictor(self, features):
        targets = np.where(features[:, 0] > 0.0, 2.0, -1.0)
        forest = fit_forest(features, targets, seed=2)
        assert forest.oob_error_ < targets.var()

    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_pure_noise_oob_band(self, features, seed):
        noise = np.random.default_rng(1000 + seed).normal(size=200)
        forest = fit_forest(features, noise, seed=seed)
        ratio = forest.oob_error_ / noise.var()
        assert 0.8 <= ratio <= 1.3

    def test_too_few_rows(self, rng):
        with pytest.raises(DataError, match="at least 5 observations"):
            RegressionForest().fit(rng.normal(size=(4, 2)), rng.normal(size=4))

    def test_prediction_is_tree_mean(self, features, rng):
        targets = rng.normal(size=200)
        forest = RegressionForest(num_trees=30, min_leaf=5, seed=3).fit(features, targets)
        query = rng.normal(size=(17, 4))
        per_tree = forest.tree_predictions(query)
        np.testing.assert_allclose(forest.predict(query), per_tree.mean(axis=0), rtol=1e-12)

    def test_deterministic_given_seed(self, features, rng):
        targets = rng.normal(size=200)
        query = rng.normal(size=(10, 4))
        a = RegressionForest(num_trees=40, seed=9).fit(features, targets).predict(query)
        b = RegressionForest(num_trees=40, seed=9).fit(features, targets).predict(query)
        np.testing.assert_array_equal(a, b)
        c = RegressionForest(num_trees=40, seed=10).fit(features, targets).predict(query)
        assert not np.array_equal(a, c)

    def test_thread_count_invariance(self, features, rng):
        targets = rng.normal(size=200)
        query = rng.normal(size=(25, 4))
        before = numba.get_num_threads()
        try:
            numba.set_num_threads(1)
            one = fit_forest(features, targets, seed=5)
            pred_one = one.predict(query)
            numba.set_num_threads(min(2, numba.config.NUMBA_NUM_THREADS))
            two = fit_forest(features, targets, seed=5)
            pred_two = two.predict(query)
        finally:
            numba.set_num_threads(before)
        assert one.oob_error_ == two.oob_error_
        np.testing.assert_array_equal(pred_one, pred_two)

    def test_oob_excludes_inbag_trees(self, features, rng):
        targets = rng.normal(size=200)
        forest = RegressionForest(num_trees=20, min_leaf=5, seed=4).fit(features, targets)
        per_tree = forest.tree_predictions(features)
        inbag = forest._inbag
        for i in range(0, 200, 23):
            oob_trees = np.flatnonzero(inbag[:, i] == 0)
            if oob_trees.size:
                expected = per_tree[oob_trees, i].mean()
                assert forest.oob_prediction_[i] == pytest.approx(expected, rel=1e-12)
                assert forest.oob_count_[i] == oob_trees.size

    def test_query_width_checked(self, features, rng):
        forest = RegressionForest(num_trees=10, seed=0).fit(features, rng.normal(size=200))
        with pytest.raises(DataError, match="features"):
            forest.predict(rng.normal(size=(5, 3)))

    def test_min_leaf_respected(self, features, rng):
        # with min_leaf > n/2 the root cannot split: constant trees
        targets = rng.normal(size=200)
        forest = RegressionForest(num_trees=10, min_leaf=101, seed=1).fit(features, targets)
        preds = forest.tree_predictions(features)
        assert all(np.ptp(preds[t]) == 0.0 for t in range(10))


class TestFitForest:
    def test_selects_on_grid(self, features, rng):
        forest = fit_forest(features, rng.normal(size=200), seed=7)
        assert forest.num_trees == 200
        assert forest.min_leaf in (1, 5, 10)
        assert forest.max_features in (2, 4)
        assert forest.max_depth is None
        assert np.isfinite(forest.oob_error_)

    def test_noise_prefers_stronger_regularization(self, features):
        noise = np.random.default_rng(77).normal(size=200)
        forest = fit_forest(features, noise, seed=3)
        assert forest.min_leaf >= 5
