import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import chi2_contingency

from dynologit import (
    Bernoulli,
    ConstantAlpha,
    CorrelatedAlpha,
    DgpConfig,
    DiscreteUniform,
    Gaussian,
    GaussianAlpha,
    ModelShape,
    PanelDataset,
    Params,
    Spell,
    category_probability,
    indicator,
    simulate,
)
from dynologit.core import (
    category_probabilities,
    cumulative_probability,
    draw_outcome,
    parse_alpha_scheme,
    parse_covariate_scheme,
)
from dynologit.exceptions import EmptyDatasetError, InvalidParameterError
from dynologit.oracle import OracleModel, path_probabilities

thresholds = st.lists(st.floats(0.05, 3.0), min_size=1, max_size=5).map(lambda gaps: np.cumsum(gaps) - gaps[0] * 2)


class TestShapeAndParams:
    def test_shape_validation(self):
        with pytest.raises(InvalidParameterError):
            ModelShape(1, 1, 2)
        with pytest.raises(InvalidParameterError):
            ModelShape(4, 1, 5)
        with pytest.raises(InvalidParameterError):
            ModelShape(4, 1, 1)
        with pytest.raises(InvalidParameterError):
            ModelShape(4, -1, 3)

    def test_layout(self):
        shape = ModelShape(5, 2, 3)
        assert shape.free_thresholds == (2, 4, 5)
        assert shape.n_params == 6
        assert shape.gamma_slot(3) is None
        assert [shape.gamma_slot(j) for j in (2, 4, 5)] == [3, 4, 5]
        assert shape.param_names(["age", "inc"]) == ["beta_age", "beta_inc", "rho", "gamma_2", "gamma_4", "gamma_5"]

    def test_gamma_full_inserts_zero(self):
        shape = ModelShape(4, 2, 3)
        p = Params((1, -0.5), 0.7, (-3, 3))
        np.testing.assert_array_equal(p.gamma_full(shape), [-3.0, 0.0, 3.0])
        assert p.is_model_valid(shape)
        assert not Params((1, -0.5), 0.7, (3, -3)).is_model_valid(shape)

    def test_vector_round_trip(self):
        shape = ModelShape(4, 2, 3)
        p = Params((1, -0.5), 0.7, (-3, 3))
        assert Params.from_vector(p.to_vector(), shape) == p
        with pytest.raises(InvalidParameterError):
            Params.from_vector(np.zeros(3), shape)
        with pytest.raises(InvalidParameterError):
            Params((1,), 0.0, (0,)).check_shape(shape)

    def test_nonfinite_rejected(self):
        with pytest.raises(InvalidParameterError):
            Params((np.nan,), 0.0, ())


class TestProbabilities:
    def test_indicator_examples(self):
        assert indicator(2, 3) == 0
        assert indicator(4, 4) == 1
        assert indicator(3, 2) == 1
        np.testing.assert_array_equal(indicator(np.array([1, 3, 4]), 3), [0, 1, 1])

    def test_category_probability_examples(self):
        assert category_probability(0.0, 2, [0.0]) == pytest.approx(0.5, abs=1e-15)
        assert sum(category_probability(0.0, j, [-1.0, 1.0]) for j in (1, 2, 3)) == pytest.approx(1.0, abs=1e-15)
        assert category_probability(1.5, 2, [0.0]) == pytest.approx(0.8175744761936437, abs=1e-15)

    def test_rejects_bad_input(self):
        with pytest.raises(InvalidParameterError):
            category_probability(0.0, 2, [1.0, -1.0])
        with pytest.raises(InvalidParameterError):
            category_probability(0.0, 4, [-1.0, 1.0])

    @given(eta=st.floats(-40, 40), g=thresholds)
    def test_probabilities_sum_to_one(self, eta, g):
        p = category_probabilities(eta, g)
        assert np.all(p >= 0)
        assert abs(p.sum() - 1.0) < 1e-12

    @given(eta=st.floats(-20, 20), g=thresholds)
    def test_cells_are_cumulative_differences(self, eta, g):
        J = g.size + 1
        for j in range(1, J + 1):
            diff = cumulative_probability(eta, j, g) - cumulative_probability(eta, j + 1, g)
            assert category_probability(eta, j, g) == pytest.approx(diff, abs=1e-12)

    def test_monotone_in_eta(self):
        g = [-1.0, 0.0, 2.0]
        grid = np.linspace(-5, 5, 100)
        top = category_probability(grid, 4, g)
        bottom = category_probability(grid, 1, g)
        assert np.all(np.diff(top) > 0)
        assert np.all(np.diff(bottom) < 0)

    def test_extreme_index_is_stable(self):
        p = category_probabilities(np.array([-800.0, 800.0]), [-1.0, 0.0, 1.0])
        assert np.all(np.isfinite(p))
        np.testing.assert_allclose(p.sum(axis=1), 1.0)

    def test_draw_outcome(self):
        g = np.array([-1.0, 0.0, 1.0])
        np.testing.assert_array_equal(draw_outcome(np.array([-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 3.0]), g), [1, 2, 2, 3, 3, 4, 4])


class TestGenerators:
    def test_parsers(self):
        assert parse_alpha_scheme("constant:1.5") == ConstantAlpha(1.5)
        assert parse_alpha_scheme("gaussian:0,2") == GaussianAlpha(0.0, 2.0)
        assert parse_alpha_scheme("correlated:0.5") == CorrelatedAlpha(0.5)
        assert parse_covariate_scheme("bernoulli:0.3") == Bernoulli(0.3)
        assert parse_covariate_scheme("uniform:3").kind == "discrete"
        assert parse_covariate_scheme("gaussian:0;1") == Gaussian(0.0, 1.0)
        assert parse_covariate_scheme("gaussian:0;1").kind == "continuous"
        with pytest.raises(InvalidParameterError):
            parse_alpha_scheme("laplace:1")
        with pytest.raises(InvalidParameterError):
            parse_covariate_scheme("poisson:1")

    def test_invalid_generators(self):
        with pytest.raises(InvalidParameterError):
            Bernoulli(1.5)
        with pytest.raises(InvalidParameterError):
            GaussianAlpha(0.0, -1.0)

    def test_config_rejects_nonmonotone_thresholds(self):
        shape = ModelShape(4, 1, 3)
        with pytest.raises(InvalidParameterError):
            DgpConfig(shape, Params((0.0,), 0.0, (1.0, 2.0)), covariate_scheme=(Bernoulli(0.5),))
        with pytest.raises(InvalidParameterError):
            DgpConfig(shape, Params((0.0,), 0.0, (-1.0, 1.0)), covariate_scheme=())


class TestSimulate:
    def test_deterministic(self):
        cfg = DgpConfig(ModelShape(4, 1, 3), Params((1.0,), 0.5, (-1.0, 1.0)), CorrelatedAlpha(0.5), (Gaussian(),), seed=3)
        a, b = simulate(cfg, 5000), simulate(cfg, 5000)
        assert a.Y.tobytes() == b.Y.tobytes()
        assert a.X.tobytes() == b.X.tobytes()
        assert a.covariate_kind == ("continuous",)

    def test_prefix_stable_across_n(self):
        cfg = DgpConfig(ModelShape(3, 1, 2), Params((0.5,), 0.5, (1.0,)), GaussianAlpha(), (Bernoulli(0.5),), seed=9)
        small, big = simulate(cfg, 100), simulate(cfg, 9000)
        np.testing.assert_array_equal(small.Y, big.Y[:100])
        np.testing.assert_array_equal(small.X, big.X[:100])

    def test_empty(self):
        cfg = DgpConfig(ModelShape(2, 0, 2), Params((), 0.0, ()))
        with pytest.raises(EmptyDatasetError):
            simulate(cfg, 0)

    def test_symmetric_binary(self):
        cfg = DgpConfig(ModelShape(2, 0, 2), Params((), 0.0, ()), ConstantAlpha(0.0), seed=1)
        ds = simulate(cfg, 25_000)
        share = np.mean(ds.Y[:, 1:] == 2)  # 75 000 draws
        assert abs(share - 0.5) < 0.005

    def test_state_dependence_direction(self):
        cfg = DgpConfig(ModelShape(2, 0, 2), Params((), 5.0, ()), ConstantAlpha(-2.5), seed=2)
        Y = simulate(cfg, 20_000).Y
        prev, nxt = Y[:, :3].ravel(), Y[:, 1:].ravel()
        assert np.mean(nxt[prev == 2] == 2) > np.mean(nxt[prev == 1] == 2)

    def test_transitions_match_oracle_at_alpha_zero(self):
        shape = ModelShape(4, 2, 3)
        theta = Params((1.0, -0.5), 0.7, (-3.0, 3.0))
        cfg = DgpConfig(shape, theta, ConstantAlpha(0.0), (DiscreteUniform((0.0,)), DiscreteUniform((0.0,))), seed=4)
        Y = simulate(cfg, 50_000).Y
        counts = np.zeros((4, 4))
        np.add.at(counts, (Y[:, :3].ravel() - 1, Y[:, 1:].ravel() - 1), 1)
        freq = counts / counts.sum(axis=1, keepdims=True)
        g = theta.gamma_full(shape)
        expected = np.array([category_probabilities(theta.rho * (y >= 3), g) for y in range(1, 5)])
        se = np.sqrt(expected * (1 - expected) / counts.sum(axis=1, keepdims=True))
        assert np.all(np.abs(freq - expected) < 4 * se + 1e-12)
        # rho > 0: being at or above the cutoff makes staying there more likely
        assert freq[2:, 2:].sum(axis=1).min() > freq[:2, 2:].sum(axis=1).max()

    def test_no_dependence_without_rho_and_beta(self):
        cfg = DgpConfig(ModelShape(3, 0, 2), Params((), 0.0, (1.0,)), ConstantAlpha(0.3), seed=8)
        Y = simulate(cfg, 100_000).Y
        table = np.zeros((3, 3))
        np.add.at(table, (Y[:, 1] - 1, Y[:, 2] - 1), 1)
        assert chi2_contingency(table)[1] > 0.01

    def test_path_frequencies_match_oracle(self):
        shape = ModelShape(3, 1, 2)
        theta = Params((0.8,), 0.6, (1.0,))
        # degenerate covariate; compare the law of periods 1..3 given y0, which does not involve p0
        cfg = DgpConfig(shape, theta, ConstantAlpha(0.0), (DiscreteUniform((0.0,)),), seed=12)
        Y = simulate(cfg, 60_000).Y
        model = OracleModel(shape, theta)
        probs = path_probabilities(model, np.zeros((3, 1)), 0.0).reshape(3, 3, 3, 3)
        cond = probs / probs.sum(axis=(1, 2, 3), keepdims=True)
        for y0 in (1, 2, 3):
            sub = Y[Y[:, 0] == y0]
            emp = np.zeros((3, 3, 3))
            np.add.at(emp, (sub[:, 1] - 1, sub[:, 2] - 1, sub[:, 3] - 1), 1)
            emp /= len(sub)
            p = cond[y0 - 1]
            se = np.sqrt(p * (1 - p) / len(sub))
            assert np.all(np.abs(emp - p) < 4 * se + 1e-12)


class TestDataset:
    def test_read_only_copies(self):
        Y = np.ones((2, 4), dtype=int)
        X = np.zeros((2, 3, 1))
        ds = PanelDataset(ModelShape(2, 1, 2), None, Y, X)
        Y[0, 0] = 2
        assert ds.Y[0, 0] == 1
        with pytest.raises(ValueError):
            ds.Y[0, 0] = 2
        assert Y.flags.writeable

    def test_validation(self):
        shape = ModelShape(3, 1, 2)
        with pytest.raises(InvalidParameterError):
            PanelDataset(shape, None, np.ones((2, 3)), np.zeros((2, 3, 1)))
        with pytest.raises(InvalidParameterError):
            PanelDataset(shape, None, np.full((2, 4), 4), np.zeros((2, 3, 1)))
        with pytest.raises(InvalidParameterError):
            PanelDataset(shape, None, np.ones((2, 4)), np.zeros((2, 3, 2)))
        with pytest.raises(InvalidParameterError):
            PanelDataset(shape, None, np.ones((2, 4)), np.zeros((2, 3, 1)), covariate_kind=("ordinal",))

    def test_spells_round_trip(self):
        shape = ModelShape(3, 1, 2)
        spells = [Spell("a", (1, 2, 3, 1), np.array([[0.0], [1.0], [1.0]])), Spell("b", (3, 3, 3, 3), np.zeros((3, 1)))]
        ds = PanelDataset.from_spells(shape, spells)
        back = list(ds.spells)
        assert [s.id for s in back] == ["a", "b"]
        assert back[0].y == (1, 2, 3, 1)
        np.testing.assert_array_equal(ds.subset([1]).Y, [[3, 3, 3, 3]])
        np.testing.assert_array_equal(ds.shifted(2.0).X[0, :, 0], [2.0, 3.0, 3.0])
