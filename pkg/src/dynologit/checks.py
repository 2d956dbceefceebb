"""Self-checks run by ``dynologit check``: oracle equalities, identification, derivatives, concavity."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .core import CorrelatedAlpha, DgpConfig, DiscreteUniform, ModelShape, simulate
from .events import enumerate_cutoff_pairs
from .likelihood import CompositeLikelihood
from .oracle import (
    DEFAULT_ALPHA_GRID,
    OracleModel,
    closed_form_probability,
    conditional_event_probability,
    identify_from_population,
    random_model_valid_params,
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail} ({self.seconds:.2f}s)"


def _timed(name, fn):
    t0 = time.perf_counter()
    passed, detail = fn()
    return CheckResult(name, bool(passed), detail, time.perf_counter() - t0)


def alpha_free_check(shape: ModelShape, seed=0, draws=200, tol=1e-10) -> CheckResult:
    """Oracle ``P(B|C)`` equals the logistic closed form at every alpha, and does not vary with alpha."""

    def run():
        rng = np.random.default_rng(seed)
        pairs = enumerate_cutoff_pairs(shape)
        worst_err = worst_spread = 0.0
        for _ in range(draws):
            theta = random_model_valid_params(rng, shape)
            x1, x2 = rng.normal(size=(2, shape.K))
            x = np.stack([x1, x2, x2])
            pair = pairs[rng.integers(len(pairs))]
            d0, d3 = (int(v) for v in rng.integers(0, 2, 2))
            model = OracleModel(shape, theta)
            target = closed_form_probability(theta, shape, x, pair, d0, d3)
            vals = [conditional_event_probability(model, x, a, pair, d0, d3) for a in DEFAULT_ALPHA_GRID]
            worst_err = max(worst_err, max(abs(v - target) for v in vals))
            worst_spread = max(worst_spread, max(vals) - min(vals))
        return worst_err < tol and worst_spread < tol, f"max |oracle - closed form| {worst_err:.2e}, max alpha spread {worst_spread:.2e}"

    return _timed("alpha-free switching probability", run)


def identification_check(shape: ModelShape, seed=0, draws=20, tol=1e-8) -> CheckResult:
    """Population moments recover theta with one discrete covariate on a 3-point stayer support."""
    one = ModelShape(shape.J, 1, shape.k)
    support = [np.array([[0.0], [0.0], [0.0]]), np.array([[1.0], [0.0], [0.0]]), np.array([[0.0], [1.0], [1.0]])]

    def run():
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(draws):
            theta = random_model_valid_params(rng, one)
            model = OracleModel(one, theta, x_support=support)
            got = identify_from_population(model)
            worst = max(worst, float(np.max(np.abs(got.to_vector() - theta.to_vector()))))
        return worst < tol, f"max sup-norm error {worst:.2e} over {draws} parameters"

    return _timed("constructive identification", run)


def _check_dataset(shape: ModelShape, n: int, seed: int):
    theta = random_model_valid_params(np.random.default_rng(seed), shape, rho_range=(0.2, 1.0))
    gens = tuple(DiscreteUniform(3) for _ in range(shape.K))
    return simulate(DgpConfig(shape, theta, CorrelatedAlpha(0.5), gens, seed=seed), n)


def derivative_check(shape: ModelShape, seed=0, n=500, draws=20, step=1e-5, tol_score=1e-6, tol_hess=1e-5) -> CheckResult:
    """Analytic score and Hessian against central finite differences."""

    def run():
        lik = CompositeLikelihood(_check_dataset(shape, n, seed))
        rng = np.random.default_rng(seed + 1)
        p = shape.n_params
        eye = np.eye(p)
        worst_g = worst_h = 0.0
        for _ in range(draws):
            x = random_model_valid_params(rng, shape).to_vector()
            g, H = lik.score(x), lik.hessian(x)
            fd_g = np.array([(lik.loglik(x + step * e) - lik.loglik(x - step * e)) / (2 * step) for e in eye])
            fd_H = np.column_stack([(lik.score(x + step * e) - lik.score(x - step * e)) / (2 * step) for e in eye])
            worst_g = max(worst_g, float(np.max(np.abs(fd_g - g)) / max(1.0, np.max(np.abs(g)))))
            worst_h = max(worst_h, float(np.max(np.abs(fd_H - H)) / max(1.0, np.max(np.abs(H)))))
        ok = worst_g < tol_score and worst_h < tol_hess
        return ok, f"score rel err {worst_g:.2e}, hessian rel err {worst_h:.2e} over {draws} parameters at n={n}"

    return _timed("analytic derivatives", run)


def concavity_check(shape: ModelShape, seed=0, n=500, draws=100, tol=1e-10) -> CheckResult:
    """The composite Hessian is negative semidefinite at arbitrary parameters."""

    def run():
        lik = CompositeLikelihood(_check_dataset(shape, n, seed))
        rng = np.random.default_rng(seed + 2)
        worst = -np.inf
        for _ in range(draws):
            x = rng.normal(scale=2.0, size=shape.n_params)
            H = lik.hessian(x)
            worst = max(worst, float(np.linalg.eigvalsh((H + H.T) / 2).max()))
        return worst <= tol, f"largest Hessian eigenvalue {worst:.2e} over {draws} parameters"

    return _timed("concavity", run)


def run_all(shape: ModelShape, seed: int = 0) -> list[CheckResult]:
    """Every check; oracle checks need ``J <= 5`` and at least one covariate."""
    K = max(shape.K, 2)
    s = ModelShape(shape.J, K, shape.k)
    return [
        alpha_free_check(s, seed),
        identification_check(s, seed),
        derivative_check(s, seed),
        concavity_check(s, seed),
    ]


__all__ = [
    "CheckResult",
    "alpha_free_check",
    "concavity_check",
    "derivative_check",
    "identification_check",
    "run_all",
]
