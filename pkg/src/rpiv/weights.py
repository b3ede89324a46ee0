"""Weight-function learning on the auxiliary sample.

The auxiliary half of the data is used to (1) fit 2SLS and form residuals,
(2) regress those residuals on the full augmented instrument matrix with a
user-chosen regressor (default: the out-of-bag tuned forest), and (3) clip
the learned function into [-1, 1]:

    w(z) = sign(w0(z)) * min(|w0(z)|, K) / K,

with K a high quantile of the in-sample |w0| values.
"""

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from .dataset import Dataset
from .forest import fit_forest
from .streams import derive_seed
from .twostage import fit_tsls

# Stream tag separating the regressor's seed from the split seed.
_LEARNER_STREAM = 0x17EA


@runtime_checkable
class Regressor(Protocol):
    """Anything with scikit-learn fit/predict semantics."""

    def fit(self, features, targets): ...

    def predict(self, features) -> np.ndarray: ...


@dataclass(frozen=True)
class WeightFunction:
    """Clipped regression function with values in [-1, 1].

    ``clip_k == 0`` marks the degenerate case where the base regressor
    predicted 0 everywhere on the auxiliary sample; the function is then
    identically zero.
    """

    base: object
    clip_k: float

    def evaluate(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        if z.ndim == 1:
            z = z.reshape(-1, 1)
        if self.clip_k == 0.0:
            return np.zeros(z.shape[0])
        raw = np.asarray(self.base.predict(z), dtype=np.float64)
        return np.sign(raw) * np.minimum(np.abs(raw), self.clip_k) / self.clip_k

    def __call__(self, z) -> np.ndarray:
        return self.evaluate(z)


def learn_weight(aux: Dataset, regressor: Regressor | None = None,
                 clip_quantile: float = 0.9, seed: int = 0) -> WeightFunction:
    """Learn the clipped weight function on the auxiliary sample.

    Parameters
    ----------
    aux : auxiliary slice of the (augmented) dataset; must satisfy the 2SLS
        rank conditions.
    regressor : unfitted scikit-learn style regressor to use for the
        residual regression.  None selects the out-of-bag tuned forest,
        seeded from ``seed``.  A passed instance is refit in place.
    clip_quantile : quantile of in-sample |predictions| defining the clip
        threshold K (linear-interpolation convention).  If that quantile is
        0, K falls back to max|prediction|; if still 0 the weight function
        is identically zero.
    seed : seed for the default regressor.
    """
    if not 0.0 < clip_quantile < 1.0:
        raise ValueError("clip_quantile must be in (0, 1)")
    fit = fit_tsls(aux.y, aux.x, aux.z)
    if regressor is None:
        model = fit_forest(aux.z, fit.residuals, derive_seed(seed, _LEARNER_STREAM))
    else:
        model = regressor.fit(np.asarray(aux.z, dtype=np.float64), fit.residuals)
        if model is None:  # tolerate fit() that does not return self
            model = regressor
    preds = np.abs(np.asarray(model.predict(np.asarray(aux.z, dtype=np.float64)), dtype=np.float64))
    clip_k = float(np.quantile(preds, clip_quantile))
    if clip_k == 0.0:
        clip_k = float(preds.max())
    return WeightFunction(base=model, clip_k=clip_k)
