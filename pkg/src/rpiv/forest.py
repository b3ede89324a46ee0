"""Random-forest regression with out-of-bag tuning.

:class:`RegressionForest` is a scikit-learn style estimator (axis-aligned
splits, variance-reduction criterion, bootstrap resamples, equally-weighted
tree mean).  :func:`fit_forest` wraps it in a small out-of-bag grid search,
which is how the weight learner picks its hyperparameters.
"""

import math

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from . import _forest_impl as impl
from .exceptions import DataError


def _validate_features(features, what="features"):
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    if x.ndim != 2 or x.shape[1] < 1:
        raise DataError(f"{what} must be a 2-d array with at least one column")
    if not np.all(np.isfinite(x)):
        raise DataError(f"non-finite value in {what}")
    return np.ascontiguousarray(x)


class RegressionForest(RegressorMixin, BaseEstimator):
    """Random forest for regression.

    Parameters
    ----------
    num_trees : number of bootstrap trees.
    min_leaf : minimum training observations per leaf.
    max_features : features tried per split; None means all.
    max_depth : depth limit; None means unbounded.
    seed : base seed; each tree's stream is derived from (seed, tree index),
        so fits are reproducible at any thread count.

    Attributes
    ----------
    oob_error_ : mean squared out-of-bag error over covered rows.
    n_features_in_ : number of feature columns seen in fit.
    """

    def __init__(self, num_trees=200, min_leaf=5, max_features=None, max_depth=None, seed=0):
        self.num_trees = num_trees
        self.min_leaf = min_leaf
        self.max_features = max_features
        self.max_depth = max_depth
        self.seed = seed

    def fit(self, features, targets):
        x = _validate_features(features)
        y = np.ascontiguousarray(np.asarray(targets, dtype=np.float64).reshape(-1))
        n, n_feat = x.shape
        if y.shape[0] != n:
            raise DataError("features and targets must have the same length")
        if not np.all(np.isfinite(y)):
            raise DataError("non-finite value in targets")
        if n < 5:
            raise DataError("forest requires at least 5 observations")
        if self.num_trees < 1 or self.min_leaf < 1:
            raise DataError("num_trees and min_leaf must be positive")
        max_features = n_feat if self.max_features is None else int(self.max_features)
        if not 1 <= max_features <= n_feat:
            raise DataError("max_features must be in [1, number of features]")
        max_depth = 0 if self.max_depth is None else int(self.max_depth)

        *nodes, inbag = impl.fit_trees(x, y, self.seed, int(self.num_trees),
                                       int(self.min_leaf), max_features, max_depth)
        self._nodes = tuple(nodes)
        self._inbag = inbag
        self.n_features_in_ = n_feat
        oob_pred, oob_count = impl.oob_predictions(x, *nodes, inbag)
        covered = oob_count > 0
        if covered.any():
            diff = y[covered] - oob_pred[covered]
            self.oob_error_ = float(np.mean(diff * diff))
        else:
            self.oob_error_ = float("nan")
        self.oob_prediction_ = oob_pred
        self.oob_count_ = oob_count
        return self

    def _check_query(self, features):
        if not hasattr(self, "_nodes"):
            raise DataError("forest is not fitted")
        x = _validate_features(features)
        if x.shape[1] != self.n_features_in_:
            raise DataError(
                f"query has {x.shape[1]} features, forest was fit with {self.n_features_in_}"
            )
        return x

    def predict(self, features):
        x = self._check_query(features)
        return impl.predict_mean(x, *self._nodes)

    def tree_predictions(self, features):
        """Per-tree predictions, shape (num_trees, n_query)."""
        x = self._check_query(features)
        return impl.predict_per_tree(x, *self._nodes)


def fit_forest(features, targets, seed: int) -> RegressionForest:
    """Fit a forest with hyperparameters selected by out-of-bag error.

    The grid is num_trees {200} x min_leaf {1, 5, 10} x max_features
    {ceil(sqrt(k)), k} x unbounded depth.  Ties are broken toward fewer
    trees, then shallower depth, then grid order.  Returns the winning
    fitted :class:`RegressionForest`.
    """
    x = _validate_features(features)
    n_feat = x.shape[1]
    sqrt_feat = min(n_feat, math.ceil(math.sqrt(n_feat)))
    feature_grid = [sqrt_feat] if sqrt_feat == n_feat else [sqrt_feat, n_feat]

    best = None
    best_key = None
    index = 0
    for min_leaf in (1, 5, 10):
        for max_features in feature_grid:
            model = RegressionForest(
                num_trees=200, min_leaf=min_leaf, max_features=max_features,
                max_depth=None, seed=seed,
            ).fit(x, targets)
            depth_key = math.inf if model.max_depth is None else model.max_depth
            key = (model.oob_error_, model.num_trees, depth_key, index)
            if best_key is None or key < best_key:
                best, best_key = model, key
            index += 1
    return best
