import numpy as np
import pytest

from dynologit import (
    ConstantAlpha,
    FitConfig,
    ModelShape,
    PanelDataset,
    Params,
    bootstrap,
    composite_score,
    fit,
    fit_pooled,
    interpret,
    sandwich_vcov,
)
from dynologit.estimator import information_diagnostic, newton_maximize
from dynologit.exceptions import (
    InvalidParameterError,
    NoInformationError,
    SeparationError,
    SingularHessianError,
    UnreliableBootstrapError,
)

from helpers import SHAPE, THETA, hk_binary_fit, mc_dataset

TRUE = THETA.to_vector()


@pytest.fixture(scope="module")
def big():
    return mc_dataset(50_000, seed=3)


@pytest.fixture(scope="module")
def big_fit(big):
    return fit(big)


class TestNewton:
    def test_quadratic_one_step(self):
        A = np.array([[2.0, 0.5], [0.5, 1.0]])
        b = np.array([1.0, -2.0])

        def fun(x):
            return -0.5 * x @ A @ x + b @ x, b - A @ x, -A

        out = newton_maximize(fun, np.zeros(2))
        np.testing.assert_allclose(out.x, np.linalg.solve(A, b))
        assert out.converged and out.iterations == 1

    def test_held_coordinates(self):
        def fun(x):
            return -np.sum((x - 1) ** 2), -2 * (x - 1), -2 * np.eye(3)

        out = newton_maximize(fun, np.zeros(3), free=[True, False, True])
        np.testing.assert_allclose(out.x, [1.0, 0.0, 1.0])

    def test_collinear_handled_by_ridge(self):
        def fun(x):
            return -(x[0] + x[1] - 1) ** 2, np.array([-2, -2]) * (x[0] + x[1] - 1), -2 * np.ones((2, 2))

        out = newton_maximize(fun, np.zeros(2))
        assert out.converged
        assert out.x.sum() == pytest.approx(1.0)

    def test_zero_curvature_names_slots(self):
        def fun(x):
            return x[0] - x[1], np.array([1.0, -1.0]), np.zeros((2, 2))

        with pytest.raises(SingularHessianError) as err:
            newton_maximize(fun, np.zeros(2), names=["a", "b"])
        assert set(err.value.slots) == {"a", "b"}

    def test_unbounded_direction_hits_norm_bound(self):
        def fun(x):
            return -x[0] ** 2 + x[1], np.array([-2 * x[0], 1.0]), np.diag([-2.0, 0.0])

        with pytest.raises(SeparationError):
            newton_maximize(fun, np.ones(2), names=["a", "b"])


class TestFit:
    def test_recovers_truth(self, big_fit):
        assert big_fit.converged
        assert np.all(np.abs(big_fit.estimates - TRUE) < 3 * big_fit.se)
        assert big_fit.param_names == ["beta_x1", "beta_x2", "rho", "gamma_2", "gamma_4"]
        assert big_fit.theta_hat.is_model_valid(SHAPE)

    def test_first_order_condition(self, big, big_fit):
        assert np.max(np.abs(composite_score(big, big_fit.theta_hat))) <= 1e-8

    def test_monotone_ascent(self, big_fit, panel_2k):
        for res in (big_fit, fit(panel_2k)):
            assert np.all(np.diff(res.trace) >= 0)
            assert len(res.trace) == res.iterations + 1

    def test_invariances(self, panel_2k):
        base = fit(panel_2k).estimates
        perm = np.random.default_rng(0).permutation(panel_2k.n)
        assert np.max(np.abs(fit(panel_2k.subset(perm)).estimates - base)) < 1e-6
        assert np.max(np.abs(fit(panel_2k.shifted([10.0, -4.0])).estimates - base)) < 1e-6

    def test_start_value_irrelevant(self, panel_2k):
        a = fit(panel_2k).estimates
        b = fit(panel_2k, FitConfig(init=Params((2.0, 2.0), -1.0, (-5.0, 1.0)))).estimates
        assert np.max(np.abs(a - b)) < 1e-6

    def test_sandwich_matches_fit(self, panel_2k):
        res = fit(panel_2k)
        np.testing.assert_allclose(sandwich_vcov(panel_2k, res.theta_hat), res.vcov, rtol=1e-12)
        assert np.allclose(res.vcov, res.vcov.T)
        assert np.all(np.linalg.eigvalsh(res.vcov) > 0)

    def test_information_diagnostic(self, big, big_fit):
        assert information_diagnostic(big, big_fit.theta_hat) < 0.1

    def test_no_switchers(self):
        ds = PanelDataset(SHAPE, None, np.tile([3, 3, 3, 3], (50, 1)), np.zeros((50, 3, 2)))
        with pytest.raises(NoInformationError):
            fit(ds)

    def test_binary_matches_conditional_logit(self):
        ds = mc_dataset(20_000, seed=8, shape=ModelShape(2, 2, 2), theta=Params((1.0, -0.5), 0.7, ()))
        res = fit(ds)
        b, _ = hk_binary_fit(ds)
        assert np.max(np.abs(res.estimates - b)) < 1e-8

    def test_constant_covariate_is_singular(self):
        ds = mc_dataset(3000, seed=1)
        X = np.array(ds.X)
        X[:, :, 1] = 1.0
        with pytest.raises(SingularHessianError) as err:
            fit(PanelDataset(SHAPE, None, ds.Y, X))
        assert "beta_x2" in err.value.slots

    def test_separation(self):
        shape = ModelShape(2, 1, 2)
        # dx > 0 always goes to B, dx < 0 always to A, while rho stays identified
        paths = [(1, 2, 1, 1), (1, 1, 2, 1), (2, 2, 1, 1), (2, 1, 2, 1), (1, 2, 1, 2), (2, 1, 2, 2), (1, 2, 1, 2), (2, 1, 2, 1)]
        xs = [1, -1, 1, -1, 1, -1, 1, -1]
        Y = np.array(paths * 10)
        X = np.array([[[x], [0.0], [0.0]] for x in xs] * 10)
        ds = PanelDataset(shape, None, Y, X)
        with pytest.raises(SeparationError):
            fit(ds)
        with pytest.raises(SeparationError, match="norm exceeded"):
            fit(ds, FitConfig(divergence_bound=5.0, tol_grad=1e-300, max_iter=50))

    def test_thin_pair_dropped(self):
        res = fit(mc_dataset(6000, seed=2), FitConfig(min_cell_weight=100))
        assert res.warnings == ["pair (2,4) dropped: effective weight 87 < 100"]
        assert res.cell_counts == {"2,3": 405.0, "2,4": 87.0, "3,3": 768.0, "3,4": 450.0}
        assert np.all(res.free)

    def test_unidentified_threshold_held(self):
        ds = mc_dataset(20_000, seed=2)
        Y = ds.Y
        d1 = Y[:, 1] >= 3
        # every cell that could carry gamma_4 has d3 = 1, so gamma_4 has no design mass
        drop = (d1 & (Y[:, 2] < 3) & (Y[:, 3] != 4)) | (~d1 & (Y[:, 2] == 4) & (Y[:, 3] < 3))
        res = fit(ds.subset(np.flatnonzero(~drop)))
        slot = SHAPE.gamma_slot(4)
        assert any("gamma_4 unidentified" in w for w in res.warnings)
        assert not res.free[slot]
        assert res.estimates[slot] == 0.0
        assert np.isnan(res.vcov[slot]).all()
        assert np.all(np.isfinite(np.delete(res.se, slot)))

    def test_config_validation(self):
        with pytest.raises(InvalidParameterError):
            FitConfig(tol_grad=0.0)
        with pytest.raises(InvalidParameterError):
            FitConfig(max_iter=0)
        with pytest.raises(InvalidParameterError):
            FitConfig(min_cell_weight=-1)

    def test_result_helpers(self, panel_2k):
        res = fit(panel_2k)
        lo, hi = res.ci(0.9)
        assert np.all(lo < res.estimates) and np.all(res.estimates < hi)
        assert "rho" in res.table()
        assert set(res.cell_counts) == {"2,3", "2,4", "3,3", "3,4"}


class TestBootstrap:
    def test_deterministic_and_thread_free(self, panel_2k):
        a = bootstrap(panel_2k, B=2, seed=5)
        b = bootstrap(panel_2k, B=2, seed=5)
        np.testing.assert_array_equal(a.estimates, b.estimates)
        c = bootstrap(panel_2k, B=6, seed=5)
        d = bootstrap(panel_2k, B=6, seed=5, n_jobs=3)
        np.testing.assert_array_equal(c.estimates, d.estimates)
        np.testing.assert_array_equal(c.estimates[:2], a.estimates)

    def test_drops_counted(self):
        out = bootstrap(mc_dataset(1500, seed=11), B=100, seed=0)
        assert 0 < out.n_dropped <= 20
        assert out.estimates.shape == (100 - out.n_dropped, SHAPE.n_params)
        assert "kept" in out.table()

    def test_unreliable(self):
        with pytest.raises(UnreliableBootstrapError):
            bootstrap(mc_dataset(300, seed=1), B=20, seed=0)

    def test_needs_two(self, panel_2k):
        with pytest.raises(InvalidParameterError):
            bootstrap(panel_2k, B=1)


class TestPooled:
    def test_correct_specification(self):
        ds = mc_dataset(50_000, seed=4, alpha=ConstantAlpha(0.0))
        res = fit_pooled(ds, with_lag=True)
        truth = np.array([1.0, -0.5, 0.7, -3.0, 0.0, 3.0])
        assert res.param_names == ["beta_x1", "beta_x2", "rho", "gamma_2", "gamma_3", "gamma_4"]
        assert np.all(np.abs(res.estimates - truth) < 3 * res.se)
        assert res.converged

    def test_fixed_effects_bias(self, big, big_fit):
        res = fit_pooled(big, with_lag=True)
        gap = np.abs(res.estimates[:2] - TRUE[:2])
        assert np.max(gap / res.se[:2]) > 5
        assert np.all(np.abs(big_fit.estimates[:2] - TRUE[:2]) < 3 * big_fit.se[:2])

    def test_without_lag(self, panel_2k):
        res = fit_pooled(panel_2k, with_lag=False)
        assert "rho" not in res.param_names
        assert res.model == "pooled"
        with pytest.raises(AttributeError):
            res.theta_hat

    def test_single_category(self):
        ds = PanelDataset(SHAPE, None, np.full((40, 4), 2), np.random.default_rng(0).normal(size=(40, 3, 2)))
        with pytest.raises(NoInformationError):
            fit_pooled(ds)


class TestInterpret:
    def test_reported_point(self):
        shape = ModelShape(4, 0, 3)
        out = interpret(Params((), 0.733, (-3.275, 3.326)), shape)
        assert out["-rho/gamma_2"] == pytest.approx(0.22381679389312977, abs=1e-12)
        assert out["rho/gamma_4"] == pytest.approx(0.22038484666265783, abs=1e-12)
        assert round(out["-rho/gamma_2"], 4) == 0.2238
        assert round(out["rho/gamma_4"], 4) == 0.2204

    def test_zero_rho(self):
        out = interpret(Params((1.0, 2.0), 0.0, (-1.0, 1.0)), SHAPE)
        assert all(v == 0 for v in out.values())
        assert set(out) == {"-rho/gamma_2", "rho/gamma_4", "rho/beta_x1", "rho/beta_x2"}

    def test_zero_denominator(self):
        out = interpret(Params((0.0,), 0.5, (-1.0, 1.0)), ModelShape(4, 1, 3))
        assert out["rho/beta_x1"] is None
