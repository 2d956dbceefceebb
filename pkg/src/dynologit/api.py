"""scikit-learn style estimators wrapping the composite and pooled fits.

>>> model = DynamicOrderedLogit(n_categories=4, lag_cutoff=3).fit(X, y)   # doctest: +SKIP
>>> model.coef_, model.rho_, model.thresholds_                          # doctest: +SKIP
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .core import ModelShape, PanelDataset, Params, category_probabilities
from .estimator import FitConfig, PooledOrderedLogitLikelihood, bootstrap, fit, fit_pooled, interpret
from .events import BandwidthConfig
from .likelihood import CompositeLikelihood
from .validation import check_covariate_kind, check_panel


def _to_dataset(X, y, J, k, kind, names=None):
    X, y, J_seen = check_panel(X, y, J)
    shape = ModelShape(J_seen, X.shape[2], k)
    return PanelDataset(shape, None, y, X, tuple(names or ()), check_covariate_kind(kind, X.shape[2]))


class DynamicOrderedLogit(BaseEstimator):
    """Fixed-effects dynamic ordered logit by composite conditional ML.

    Parameters
    ----------
    n_categories : int or None
        Number of outcome categories ``J``; inferred from ``y`` when None.
    lag_cutoff : int
        Cutoff ``k`` of the lag regressor ``1{y_{t-1} >= k}``; also the
        category whose threshold is normalised to zero.
    kernel : {"exact", "gaussian", "uniform"}
        Stayer weighting for ``X_2 = X_3``.
    bandwidth : float or None
        Kernel bandwidth for continuous covariates (ignored when exact).
    covariate_kind : str or sequence of str, optional
        ``"discrete"`` / ``"continuous"`` per covariate; all discrete by default.
    """

    def __init__(self, n_categories=None, lag_cutoff=2, kernel="exact", bandwidth=None, covariate_kind=None,
                 tol_grad=1e-8, tol_step=1e-10, max_iter=100, min_cell_weight=10.0):
        self.n_categories = n_categories
        self.lag_cutoff = lag_cutoff
        self.kernel = kernel
        self.bandwidth = bandwidth
        self.covariate_kind = covariate_kind
        self.tol_grad = tol_grad
        self.tol_step = tol_step
        self.max_iter = max_iter
        self.min_cell_weight = min_cell_weight

    def _fit_config(self):
        bw = BandwidthConfig(h=None if self.kernel == "exact" else self.bandwidth, kernel=self.kernel)
        return FitConfig(self.tol_grad, self.tol_step, self.max_iter, bandwidth=bw, min_cell_weight=self.min_cell_weight)

    def fit(self, X, y, feature_names=None):
        """Fit on ``X`` of shape ``(n, 3, K)`` (periods 1..3) and ``y`` of shape ``(n, 4)`` (periods 0..3)."""
        ds = _to_dataset(X, y, self.n_categories, self.lag_cutoff, self.covariate_kind, feature_names)
        res = fit(ds, self._fit_config())
        shape = ds.shape
        self.shape_ = shape
        self.result_ = res
        self.param_names_ = res.param_names
        self.coef_ = res.estimates[: shape.K].copy()
        self.rho_ = float(res.estimates[shape.K])
        self.gamma_ = res.estimates[shape.K + 1 :].copy()
        self.thresholds_ = res.theta_hat.gamma_full(shape)
        self.vcov_ = res.vcov
        self.bse_ = res.se
        self.n_iter_ = res.iterations
        self.converged_ = res.converged
        return self

    @property
    def theta_(self) -> Params:
        check_is_fitted(self, "result_")
        return self.result_.theta_hat

    def score(self, X, y):
        """Composite conditional log-likelihood (per individual) at the fitted parameters."""
        check_is_fitted(self, "result_")
        ds = _to_dataset(X, y, self.shape_.J, self.lag_cutoff, self.covariate_kind)
        return CompositeLikelihood(ds, self._fit_config().bandwidth).loglik(self.result_.estimates)

    def interpret(self):
        check_is_fitted(self, "result_")
        return interpret(self.theta_, self.shape_)

    def bootstrap(self, X, y, n_replications=500, random_state=0, n_jobs=1):
        check_is_fitted(self, "result_")
        ds = _to_dataset(X, y, self.shape_.J, self.lag_cutoff, self.covariate_kind)
        return bootstrap(ds, self._fit_config(), n_replications, random_state, n_jobs)

    def summary(self) -> str:
        check_is_fitted(self, "result_")
        return self.result_.table()


class PooledOrderedLogit(BaseEstimator):
    """Pooled ordered logit over periods 1..3 ignoring fixed effects; optional lag regressor."""

    def __init__(self, n_categories=None, lag_cutoff=2, with_lag=True, tol_grad=1e-8, tol_step=1e-10, max_iter=100):
        self.n_categories = n_categories
        self.lag_cutoff = lag_cutoff
        self.with_lag = with_lag
        self.tol_grad = tol_grad
        self.tol_step = tol_step
        self.max_iter = max_iter

    def fit(self, X, y, feature_names=None):
        ds = _to_dataset(X, y, self.n_categories, self.lag_cutoff, None, feature_names)
        res = fit_pooled(ds, self.with_lag, FitConfig(self.tol_grad, self.tol_step, self.max_iter))
        K = ds.shape.K
        self.shape_ = ds.shape
        self.result_ = res
        self.param_names_ = res.param_names
        self.coef_ = res.estimates[:K].copy()
        self.rho_ = float(res.estimates[K]) if self.with_lag else 0.0
        self.thresholds_ = res.estimates[K + int(self.with_lag) :].copy()
        self.vcov_ = res.vcov
        self.bse_ = res.se
        self.n_iter_ = res.iterations
        return self

    def predict_proba(self, X, y_lag=None):
        """Category probabilities for single-period rows ``X`` of shape ``(m, K)``, given lagged outcomes."""
        check_is_fitted(self, "result_")
        X = np.asarray(X, dtype=float).reshape(-1, self.shape_.K)
        eta = X @ self.coef_
        if self.with_lag:
            if y_lag is None:
                raise ValueError("y_lag is required when the model includes the lag regressor")
            eta = eta + self.rho_ * (np.asarray(y_lag) >= self.shape_.k)
        return category_probabilities(eta, self.thresholds_)

    def predict(self, X, y_lag=None):
        return np.argmax(self.predict_proba(X, y_lag), axis=1) + 1

    def score(self, X, y):
        """Pooled log-likelihood per individual at the fitted parameters."""
        check_is_fitted(self, "result_")
        ds = _to_dataset(X, y, self.shape_.J, self.lag_cutoff, None)
        return PooledOrderedLogitLikelihood(ds, self.with_lag).evaluate(self.result_.estimates)[0]

    def summary(self) -> str:
        check_is_fitted(self, "result_")
        return self.result_.table()
