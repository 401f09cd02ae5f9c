"""scikit-learn style wrapper around the subspace spectral estimator."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .spectral import (EspritConfig, SampleWindow, analyze, synthesize_imaginary,
                       synthesize_real)


class EspritSpectrum(TransformerMixin, BaseEstimator):
    """Fit sinusoidal models to uniformly sampled records.

    ``X`` has one row per time sample and one column per signal; the last
    row is taken at ``t_ref``. ``transform`` returns the analytic signal
    ``x + j*x_hat`` of each column, with ``x_hat`` synthesised from the
    fitted model.

    >>> t = np.arange(101) * 5e-4
    >>> est = EspritSpectrum(dt=5e-4).fit(np.cos(2 * np.pi * 50 * t)[:, None])
    >>> round(est.components_[0][0, 0], 6)
    50.0
    """

    def __init__(self, dt=5e-4, t_ref=0.0, rel_threshold=1e-8, max_order=None,
                 f_min=0.1, order=None, dc=False):
        self.dt = dt
        self.t_ref = t_ref
        self.rel_threshold = rel_threshold
        self.max_order = max_order
        self.f_min = f_min
        self.order = order
        self.dc = dc

    def _config(self) -> EspritConfig:
        return EspritConfig(self.rel_threshold, self.max_order, self.f_min, self.order,
                            self.dc)

    def _validate(self, X, reset: bool):
        X = np.asarray(X)
        if X.ndim == 1:
            X = X[:, None]
        X = check_array(X, dtype=float, ensure_min_samples=3)
        if X.shape[0] % 2 == 0:
            raise ValueError(f"need an odd number of samples, got {X.shape[0]}")
        if reset:
            self.n_features_in_ = X.shape[1]
        elif X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, the model was fitted on "
                             f"{self.n_features_in_}")
        return X

    def fit(self, X, y=None):
        X = self._validate(X, reset=True)
        config = self._config()
        self.estimates_ = [analyze(SampleWindow(col, self.dt, self.t_ref), config)
                           for col in X.T]
        self.components_ = [np.array([[c.f, c.a, c.phi] for c in e.components]).reshape(-1, 3)
                            for e in self.estimates_]
        self.n_samples_fit_ = X.shape[0]
        return self

    def _times(self, n: int) -> np.ndarray:
        return self.t_ref - self.dt * np.arange(n - 1, -1, -1)

    def quadrature(self, t):
        """Model quadrature signal at times ``t``; one column per fitted signal."""
        check_is_fitted(self)
        t = np.asarray(t, dtype=float)
        return np.stack([synthesize_imaginary(e, t) for e in self.estimates_], axis=-1)

    def predict(self, t):
        """Model in-phase signal at times ``t``; one column per fitted signal."""
        check_is_fitted(self)
        t = np.asarray(t, dtype=float)
        return np.stack([synthesize_real(e, t) for e in self.estimates_], axis=-1)

    def transform(self, X):
        check_is_fitted(self)
        X = self._validate(X, reset=False)
        return X + 1j * self.quadrature(self._times(X.shape[0]))
