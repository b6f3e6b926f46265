"""scikit-learn style wrappers around the map solver and the automorphism fit.

Complex points may be given as a complex 1-d array or as an ``(m, 2)`` real
array of ``(x, y)`` rows; outputs use the same layout as the input.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from brennan.autfit import fit_from_samples
from brennan.conformal import solve_parameter_problem


def _as_complex(X) -> tuple[np.ndarray, bool]:
    X = np.asarray(X)
    if np.iscomplexobj(X):
        return X.ravel().astype(complex), False
    if X.ndim == 2 and X.shape[1] == 2:
        return X[:, 0] + 1j * X[:, 1], True
    raise ValueError("expected complex values or an (m, 2) array of real coordinates")


def _restore(z: np.ndarray, pairs: bool) -> np.ndarray:
    return np.c_[z.real, z.imag] if pairs else z


class SchwarzChristoffelTransformer(TransformerMixin, BaseEstimator):
    """``fit`` on polygon vertices; ``transform`` maps disk points into the polygon."""

    def __init__(self, center=None, nqpts: int = 8, tol: float = 1e-8, max_iters: int = 200):
        self.center = center
        self.nqpts = nqpts
        self.tol = tol
        self.max_iters = max_iters

    def fit(self, X, y=None):
        v, _ = _as_complex(X)
        self.map_ = solve_parameter_problem(
            v, center=self.center, nqpts=self.nqpts, tol=self.tol, max_iters=self.max_iters
        )
        self.n_features_in_ = 2
        return self

    def transform(self, X):
        check_is_fitted(self, "map_")
        z, pairs = _as_complex(X)
        return _restore(np.atleast_1d(self.map_.forward(z)), pairs)

    def inverse_transform(self, X):
        check_is_fitted(self, "map_")
        w, pairs = _as_complex(X)
        return _restore(np.atleast_1d(self.map_.inverse(w)), pairs)


class DiskAutomorphismRegressor(RegressorMixin, BaseEstimator):
    """Least-squares disk automorphism through pairs ``X[i] -> y[i]``."""

    def __init__(self, multistarts: int = 8):
        self.multistarts = multistarts

    def fit(self, X, y):
        z, _ = _as_complex(X)
        w, _ = _as_complex(y)
        self.result_ = fit_from_samples(z, w, self.multistarts)
        self.lambda_ = self.result_.estimate.lam
        self.a_ = self.result_.estimate.a
        self.n_features_in_ = 2
        return self

    def predict(self, X):
        check_is_fitted(self, "result_")
        z, pairs = _as_complex(X)
        return _restore(self.result_.estimate(z), pairs)

    def score(self, X, y, sample_weight=None):
        """Coefficient of determination on complex residuals."""
        w, _ = _as_complex(y)
        pred, _ = _as_complex(self.predict(X))
        wt = np.ones(w.shape) if sample_weight is None else np.asarray(sample_weight, dtype=float)
        ss_res = np.sum(wt * np.abs(w - pred) ** 2)
        mean = np.sum(wt * w) / np.sum(wt)
        ss_tot = np.sum(wt * np.abs(w - mean) ** 2)
        return float(1 - ss_res / ss_tot) if ss_tot > 0 else 1.0
