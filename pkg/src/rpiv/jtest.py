"""Sargan-Hansen overidentification J-test baseline.

The statistic is the classical Sargan form

    J = n * mean(z r)' @ mean(z z')^-1 @ mean(z r) / mean(r^2),

with r the full-sample 2SLS residuals, compared against a chi-square with
d - p degrees of freedom.  :func:`square_instrument` appends the square of
one instrument so the J-test applies to just-identified models.
"""

from dataclasses import dataclass, replace

import numpy as np

from .dataset import AugmentedDataset
from .exceptions import DataError, EstimationError
from .gaussian import chi2_upper_tail
from .twostage import _screened_solve, fit_tsls


@dataclass(frozen=True)
class JTestOutcome:
    statistic: float
    dof: int
    p_value: float


def sargan(ds: AugmentedDataset) -> JTestOutcome:
    """Run the Sargan-Hansen J-test on the full sample.

    Requires strictly more instrument columns than regressor columns.
    """
    p = ds.x.shape[1]
    d = ds.z.shape[1]
    dof = d - p
    if dof < 1:
        raise EstimationError("just-identified: J-test undefined; augment instruments first")
    fit = fit_tsls(ds.y, ds.x, ds.z)
    n = ds.n
    szr = ds.z.T @ fit.residuals / n
    szz = ds.z.T @ ds.z / n
    quad = float(szr @ _screened_solve(szz, szr, "instrument Gram matrix singular"))
    msr = float(fit.residuals @ fit.residuals) / n
    statistic = n * quad / msr if msr > 0.0 else 0.0
    return JTestOutcome(statistic=statistic, dof=dof, p_value=chi2_upper_tail(statistic, dof))


def square_instrument(ds: AugmentedDataset, which: int) -> AugmentedDataset:
    """Append the elementwise square of one original instrument column.

    ``which`` indexes the original instrument block (before controls and
    intercept).  The squared column is inserted right after that block, so
    the trailing controls-plus-intercept layout is preserved.  Squaring a
    column that reproduces itself (binary 0/1, the intercept) or collapses
    to a constant is rejected.
    """
    if not 0 <= which < ds.n_base_z:
        raise DataError(
            f"instrument index {which} out of range (0..{ds.n_base_z - 1}); "
            "controls and intercept cannot be squared"
        )
    col = ds.z[:, which]
    squared = col * col
    if np.array_equal(squared, col) or np.ptp(squared) == 0.0:
        raise DataError("augmentation adds collinear column")
    z = np.hstack(
        [ds.z[:, : ds.n_base_z], squared.reshape(-1, 1), ds.z[:, ds.n_base_z :]]
    )
    return replace(ds, z=z, n_base_z=ds.n_base_z + 1)
