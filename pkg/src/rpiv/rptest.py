"""The residual prediction specification test.

Pipeline for one split: learn the weight function w on the auxiliary
sample, fit 2SLS on the main sample, then form

    N      = (1/sqrt(n0)) * sum_i w(z_i) r_i,
    a_w'   = -mean(w(z) x') @ M,
    sigma2 = one of three variance estimators (see below),
    stat   = N / max(sigma, sqrt(gamma)),
    p      = P(N(0,1) > stat),

where r are the main-sample 2SLS residuals, M the main-sample moment map,
and gamma a prespecified variance floor, by default 0.05 * mean(r^2).

Variance estimators (all of the score u_i = (w(z_i) + a_w' z_i) r_i):

- het:     mean(u^2) - mean(w r)^2          (heteroskedasticity-robust)
- hom:     mean((w + a_w'z)^2) * mean(r^2)  (assumes homoskedasticity)
- cluster: (1/n0) sum_g S_g^2 - (n0/G) mean(w r)^2 with S_g the
           within-cluster score total      (cluster-robust)

Multiple random splits are combined by the doubled-median rule
min(1, 2 * median(p values)).
"""

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .dataset import AugmentedDataset, Dataset, make_split
from .exceptions import DataError
from .gaussian import normal_upper_tail
from .streams import derive_seed
from .twostage import fit_tsls
from .weights import Regressor, learn_weight

VARIANCE_KINDS = ("het", "hom", "cluster")


@dataclass(frozen=True)
class TestOutcome:
    """Result of one split: statistic ingredients, p-value and metadata."""

    numerator: float
    sigma_hat: float
    gamma: float
    statistic: float
    p_value: float
    variance_kind: str
    n_a: int
    n_0: int
    seed: int
    degenerate: bool = False


@dataclass(frozen=True)
class AggregateOutcome:
    """Per-split outcomes plus the doubled-median aggregated p-value."""

    per_split: tuple[TestOutcome, ...]
    aggregated_p: float


def doubled_median(p_values) -> float:
    """Conservative multi-split combination: min(1, 2 * median).

    The median of an even-length sequence is the mean of its two central
    order statistics.
    """
    ps = np.asarray(p_values, dtype=np.float64)
    if ps.size < 1:
        raise ValueError("need at least one p-value")
    return min(1.0, 2.0 * float(np.median(ps)))


def numerator(weights: np.ndarray, residuals: np.ndarray) -> float:
    """(1/sqrt(n0)) * sum_i w_i r_i."""
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    r = np.asarray(residuals, dtype=np.float64).reshape(-1)
    if w.shape[0] != r.shape[0]:
        raise ValueError("weights and residuals length mismatch")
    return float(w @ r / math.sqrt(w.shape[0]))


def correction_vector(weights: np.ndarray, x: np.ndarray, m_hat: np.ndarray) -> np.ndarray:
    """a_w with a_w' = -mean(w_i x_i') @ m_hat; m_hat must come from the
    2SLS fit on the same sample as x."""
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] != w.shape[0]:
        raise ValueError("weights and x row-count mismatch")
    if m_hat.shape[0] != x.shape[1]:
        raise ValueError("m_hat and x dimension mismatch")
    mean_wx = w @ x / w.shape[0]
    return -(mean_wx @ m_hat)


def _score(weights, z, residuals, a_hat):
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    z = np.asarray(z, dtype=np.float64)
    if z.ndim == 1:
        z = z.reshape(-1, 1)
    r = np.asarray(residuals, dtype=np.float64).reshape(-1)
    a = np.asarray(a_hat, dtype=np.float64).reshape(-1)
    if not (w.shape[0] == z.shape[0] == r.shape[0]):
        raise ValueError("weights, z and residuals length mismatch")
    if z.shape[1] != a.shape[0]:
        raise ValueError("z and correction-vector dimension mismatch")
    return w, z, r, a, w + z @ a


def sigma_het(weights, z, residuals, a_hat) -> float:
    """Heteroskedasticity-robust variance estimate (clamped at 0)."""
    w, _, r, _, adj = _score(weights, z, residuals, a_hat)
    n = w.shape[0]
    u = adj * r
    centered = (u @ u) / n - (w @ r / n) ** 2
    return max(centered, 0.0)


def sigma_hom(weights, z, residuals, a_hat) -> float:
    """Homoskedastic variance estimate mean((w + a'z)^2) * mean(r^2)."""
    _, _, r, _, adj = _score(weights, z, residuals, a_hat)
    n = r.shape[0]
    return max((adj @ adj) / n * (r @ r) / n, 0.0)


def sigma_cluster(weights, z, residuals, a_hat, cluster_ids) -> float:
    """Cluster-robust variance estimate from within-cluster score totals."""
    w, _, r, _, adj = _score(weights, z, residuals, a_hat)
    if cluster_ids is None:
        raise DataError("cluster column required")
    ids = np.asarray(cluster_ids)
    if ids.shape[0] != w.shape[0]:
        raise ValueError("cluster ids length mismatch")
    if np.unique(ids).shape[0] < 2:
        raise DataError("cluster-robust variance requires at least 2 clusters")
    n = w.shape[0]
    u = adj * r
    _, dense = np.unique(ids, return_inverse=True)
    n_groups = int(dense.max()) + 1
    totals = np.bincount(dense, weights=u, minlength=n_groups)
    centered = (totals @ totals) / n - n / n_groups * (w @ r / n) ** 2
    return max(centered, 0.0)


def _finish_outcome(num, sigma2, gamma_frac, residuals, kind, n_a, n_0, seed):
    msr = float(residuals @ residuals) / residuals.shape[0]
    degenerate = msr == 0.0
    gamma = gamma_frac * msr if not degenerate else float(np.finfo(np.float64).eps)
    sigma_hat = math.sqrt(sigma2)
    statistic = num / max(sigma_hat, math.sqrt(gamma))
    return TestOutcome(
        numerator=num,
        sigma_hat=sigma_hat,
        gamma=gamma,
        statistic=statistic,
        p_value=normal_upper_tail(statistic),
        variance_kind=kind,
        n_a=n_a,
        n_0=n_0,
        seed=seed,
        degenerate=degenerate,
    )


def _single_split_outcomes(ds, kinds, clip_quantile, gamma_frac, seed, regressor):
    """Run one split and evaluate every requested variance kind on it.

    All kinds share the split, the learned weight function, and the main
    2SLS fit; only the variance estimator differs.
    """
    for kind in kinds:
        if kind not in VARIANCE_KINDS:
            raise ValueError(f"unknown variance kind '{kind}'")
    if "cluster" in kinds and ds.cluster_ids is None:
        raise DataError("cluster column required")

    plan = make_split(ds, seed)
    aux = ds.take(plan.aux_indices)
    main = ds.take(plan.main_indices)
    wfun = learn_weight(aux, regressor=regressor, clip_quantile=clip_quantile, seed=seed)
    fit = fit_tsls(main.y, main.x, main.z)
    w = wfun.evaluate(main.z)
    num = numerator(w, fit.residuals)
    a_hat = correction_vector(w, main.x, fit.m_hat)

    n_a = int(plan.aux_indices.shape[0])
    n_0 = int(plan.main_indices.shape[0])
    out = {}
    for kind in kinds:
        if kind == "het":
            sigma2 = sigma_het(w, main.z, fit.residuals, a_hat)
        elif kind == "hom":
            sigma2 = sigma_hom(w, main.z, fit.residuals, a_hat)
        else:
            sigma2 = sigma_cluster(w, main.z, fit.residuals, a_hat, main.cluster_ids)
        out[kind] = _finish_outcome(num, sigma2, gamma_frac, fit.residuals, kind, n_a, n_0, seed)
    return out


def run_test(ds: AugmentedDataset, *, variance: str = "het", clip_quantile: float = 0.9,
             gamma_frac: float = 0.05, seed: int = 0,
             regressor: Regressor | None = None) -> TestOutcome:
    """Run the residual prediction test on one random split.

    Parameters
    ----------
    ds : augmented dataset (controls and intercept already appended).
    variance : 'het', 'hom' or 'cluster'; 'cluster' requires cluster ids.
    clip_quantile : quantile defining the weight-function clip threshold.
    gamma_frac : variance floor as a fraction of mean squared residual.
    seed : drives the split and the default regressor.
    regressor : optional custom regressor for the residual regression.
    """
    return _single_split_outcomes(ds, (variance,), clip_quantile, gamma_frac, seed, regressor)[
        variance
    ]


def run_aggregated(ds: AugmentedDataset, num_splits: int = 50, *, variance: str = "het",
                   clip_quantile: float = 0.9, gamma_frac: float = 0.05, seed: int = 0,
                   regressor: Regressor | None = None) -> AggregateOutcome:
    """Repeat :func:`run_test` over ``num_splits`` seeded splits and combine
    p-values with the doubled-median rule min(1, 2 * median)."""
    if num_splits < 1:
        raise ValueError("num_splits must be at least 1")
    outcomes = tuple(
        run_test(ds, variance=variance, clip_quantile=clip_quantile, gamma_frac=gamma_frac,
                 seed=derive_seed(seed, k), regressor=regressor)
        for k in range(num_splits)
    )
    return AggregateOutcome(
        per_split=outcomes, aggregated_p=doubled_median([o.p_value for o in outcomes])
    )


class ResidualPredictionTest(BaseEstimator):
    """Configured test with scikit-learn parameter semantics.

    Thin object wrapper over :func:`run_test` / :func:`run_aggregated` so
    the test composes with get_params/set_params tooling; it holds no
    fitted state.
    """

    def __init__(self, variance="het", clip_quantile=0.9, gamma_frac=0.05,
                 num_splits=50, seed=0, regressor=None):
        self.variance = variance
        self.clip_quantile = clip_quantile
        self.gamma_frac = gamma_frac
        self.num_splits = num_splits
        self.seed = seed
        self.regressor = regressor

    def run(self, ds: Dataset) -> TestOutcome:
        return run_test(ds, variance=self.variance, clip_quantile=self.clip_quantile,
                        gamma_frac=self.gamma_frac, seed=self.seed, regressor=self.regressor)

    def run_aggregated(self, ds: Dataset) -> AggregateOutcome:
        return run_aggregated(ds, self.num_splits, variance=self.variance,
                              clip_quantile=self.clip_quantile, gamma_frac=self.gamma_frac,
                              seed=self.seed, regressor=self.regressor)
