"""Two-stage least squares and ordinary least squares.

The 2SLS coefficient is computed through its moment-matrix form

    beta = M @ mean(z * y),
    M    = [Sxz @ Szz^-1 @ Sxz.T]^-1 @ Sxz @ Szz^-1,

where Szz = mean(z z'), Sxz = mean(x z') are sample moments with 1/n
normalization.  Inverses are never formed literally: each one is realized
through an SVD whose singular values double as the rank screen (smallest
singular value below 1e-12 times the largest raises an error).
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import EstimationError

_RCOND = 1e-12


@dataclass(frozen=True)
class TwoSlsFit:
    """Fitted 2SLS: coefficients, the moment map M, residuals, sample size."""

    beta_hat: np.ndarray
    m_hat: np.ndarray
    residuals: np.ndarray
    sample_size: int


def _screened_solve(a: np.ndarray, b: np.ndarray, message: str) -> np.ndarray:
    """Solve a @ x = b through SVD, raising if a is numerically singular."""
    u, s, vt = np.linalg.svd(a)
    if s[-1] < _RCOND * s[0] or s[0] == 0.0:
        raise EstimationError(message)
    return vt.T @ ((u.T @ b).T / s).T


def fit_tsls(y: np.ndarray, x: np.ndarray, z: np.ndarray) -> TwoSlsFit:
    """Fit two-stage least squares of y on x with instruments z.

    Parameters
    ----------
    y : (n,) response.
    x : (n, p) regressors (endogenous plus appended exogenous columns).
    z : (n, d) instruments, d >= p.

    Returns
    -------
    TwoSlsFit with ``beta_hat`` (p,), ``m_hat`` (p, d) satisfying
    ``m_hat @ mean(z x') = I``, and residuals ``y - x @ beta_hat``.
    """
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    n = y.shape[0]
    p = x.shape[1]
    d = z.shape[1]
    if d < p:
        raise EstimationError("fewer instruments than regressors")
    if n <= d:
        raise EstimationError("sample size must exceed the instrument count")

    szz = z.T @ z / n
    sxz = x.T @ z / n
    szy = z.T @ y / n

    # t = Szz^-1 @ Sxz.T, shape (d, p)
    t = _screened_solve(szz, sxz.T, "instrument Gram matrix singular")
    g = sxz @ t
    m_hat = _screened_solve(g, t.T, "rank condition failed (instruments irrelevant?)")
    beta = m_hat @ szy
    residuals = y - x @ beta
    return TwoSlsFit(beta_hat=beta, m_hat=m_hat, residuals=residuals, sample_size=n)


def fit_ols(y: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Ordinary least squares coefficients of y on the columns of x."""
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    x = np.asarray(x, dtype=np.float64)
    n, k = x.shape
    if n <= k:
        raise EstimationError("sample size must exceed the column count")
    gram = x.T @ x / n
    rhs = x.T @ y / n
    return _screened_solve(gram, rhs, "design Gram matrix singular")
