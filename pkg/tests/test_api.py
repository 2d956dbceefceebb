import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from dynologit import DynamicOrderedLogit, PooledOrderedLogit, fit, fit_pooled
from dynologit.validation import check_covariate_kind, check_panel

from helpers import SHAPE


@pytest.fixture(scope="module")
def arrays(panel_2k):
    return np.array(panel_2k.X), np.array(panel_2k.Y)


def test_params_and_clone():
    est = DynamicOrderedLogit(n_categories=4, lag_cutoff=3, max_iter=50)
    params = est.get_params()
    assert params["lag_cutoff"] == 3 and params["kernel"] == "exact" and params["max_iter"] == 50
    twin = clone(est.set_params(min_cell_weight=5.0))
    assert twin.get_params() == est.get_params()
    assert not hasattr(twin, "result_")


def test_fit_matches_functional_api(arrays, panel_2k):
    X, y = arrays
    est = DynamicOrderedLogit(n_categories=4, lag_cutoff=3).fit(X, y, feature_names=["x1", "x2"])
    ref = fit(panel_2k)
    np.testing.assert_allclose(est.result_.estimates, ref.estimates, atol=1e-12)
    assert est.param_names_ == ["beta_x1", "beta_x2", "rho", "gamma_2", "gamma_4"]
    assert est.coef_.shape == (2,) and est.gamma_.shape == (2,)
    assert est.thresholds_[SHAPE.k - 2] == 0.0 and np.all(np.diff(est.thresholds_) > 0)
    assert est.converged_ and est.n_iter_ == ref.iterations
    np.testing.assert_array_equal(est.bse_, ref.se)
    assert est.theta_ == ref.theta_hat
    assert est.score(X, y) == pytest.approx(ref.loglik, abs=1e-12)
    assert set(est.interpret()) >= {"-rho/gamma_2", "rho/gamma_4"}
    assert "rho" in est.summary()


def test_bootstrap_method(arrays):
    X, y = arrays
    est = DynamicOrderedLogit(n_categories=4, lag_cutoff=3).fit(X, y)
    out = est.bootstrap(X, y, n_replications=3, random_state=1)
    assert out.estimates.shape[1] == 5


def test_not_fitted():
    for est in (DynamicOrderedLogit(), PooledOrderedLogit()):
        with pytest.raises(NotFittedError):
            est.summary()
    with pytest.raises(NotFittedError):
        DynamicOrderedLogit().theta_
    with pytest.raises(NotFittedError):
        PooledOrderedLogit().predict(np.zeros((1, 2)), [1])


def test_pooled_estimator(arrays, panel_2k):
    X, y = arrays
    est = PooledOrderedLogit(n_categories=4, lag_cutoff=3).fit(X, y)
    ref = fit_pooled(panel_2k, with_lag=True)
    np.testing.assert_allclose(est.result_.estimates, ref.estimates, atol=1e-12)
    assert est.thresholds_.shape == (3,)
    rows = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]])
    P = est.predict_proba(rows, y_lag=[1, 3, 4])
    assert P.shape == (3, 4)
    np.testing.assert_allclose(P.sum(axis=1), 1.0, atol=1e-12)
    pred = est.predict(rows, y_lag=[1, 3, 4])
    np.testing.assert_array_equal(pred, P.argmax(axis=1) + 1)
    # a higher x1 coefficient raises the chance of the top category
    assert P[1, 3] > P[0, 3]
    with pytest.raises(ValueError, match="y_lag"):
        est.predict_proba(rows)
    assert est.score(X, y) == pytest.approx(ref.loglik, rel=1e-12)


def test_pooled_without_lag(arrays):
    X, y = arrays
    est = PooledOrderedLogit(n_categories=4, with_lag=False).fit(X, y)
    assert est.rho_ == 0.0 and "rho" not in est.param_names_
    np.testing.assert_allclose(est.predict_proba(np.zeros((2, 2))).sum(axis=1), 1.0)


class TestValidation:
    def test_shapes(self):
        y = np.array([[1, 2, 3, 4]])
        X, y2, J = check_panel(np.zeros((1, 3)), y)
        assert X.shape == (1, 3, 1) and J == 4 and y2.dtype == np.int64
        X, _, _ = check_panel(None, y, 5)
        assert X.shape == (1, 3, 0)
        with pytest.raises(ValueError, match="shape"):
            check_panel(None, np.zeros((2, 3)))
        with pytest.raises(ValueError, match="empty"):
            check_panel(None, np.zeros((0, 4)))
        with pytest.raises(ValueError, match="X must have shape"):
            check_panel(np.zeros((2, 3, 1)), y)

    def test_values(self):
        y = np.array([[1, 2, 3, 4]])
        with pytest.raises(ValueError, match="integer"):
            check_panel(None, y + 0.5)
        with pytest.raises(ValueError, match="1..3"):
            check_panel(None, y, 3)
        with pytest.raises(ValueError, match="NaN"):
            check_panel(np.full((1, 3), np.nan), y)
        with pytest.raises(ValueError):
            DynamicOrderedLogit(lag_cutoff=3).fit(None, np.array([[0, 1, 2, 3]]))

    def test_covariate_kind(self):
        assert check_covariate_kind(None, 2) == ("discrete", "discrete")
        assert check_covariate_kind("continuous", 2) == ("continuous", "continuous")
        with pytest.raises(ValueError):
            check_covariate_kind(("discrete",), 2)
        with pytest.raises(ValueError):
            check_covariate_kind(("ordinal", "discrete"), 2)
