"""Shared data-generating setups for the test suite."""

import numpy as np

from dynologit import CorrelatedAlpha, DgpConfig, DiscreteUniform, ModelShape, Params, simulate

SHAPE = ModelShape(4, 2, 3)
THETA = Params((1.0, -0.5), 0.7, (-3.0, 3.0))
# filled by the acceptance tests, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []

# mass at zero keeps many exact stayers; the 2-point tail gives dx variation
COVARIATES = (DiscreteUniform((0.0, 0.0, 0.0, 2.0)), DiscreteUniform((0.0, 0.0, 0.0, 2.0)))


def mc_config(seed, alpha=None, theta=THETA, shape=SHAPE, covariates=COVARIATES):
    return DgpConfig(shape, theta, alpha or CorrelatedAlpha(0.5), covariates, burn_in=20, seed=seed)


def mc_dataset(n, seed, **kw):
    return simulate(mc_config(seed, **kw), n)


def hk_binary_fit(dataset):
    """Hand-coded conditional logit for J = 2 switchers, maximized by scipy.

    Switchers have y1 != y2; the outcome is ``y1 = 2`` and the index is
    ``(x1 - x2) beta + rho (y0 - y3)`` on the 0/1 scale.  Stayers need x2 = x3.
    """
    from scipy.optimize import minimize

    Y = dataset.Y - 1
    X = dataset.X
    keep = (Y[:, 1] != Y[:, 2]) & np.all(X[:, 1] == X[:, 2], axis=1)
    Z = np.column_stack([X[keep, 0] - X[keep, 1], Y[keep, 0] - Y[keep, 3]])
    d = Y[keep, 1].astype(float)
    n = dataset.n

    def negll(b):
        u = Z @ b
        return -np.sum(d * u - np.logaddexp(0.0, u)) / n

    def grad(b):
        u = Z @ b
        return -Z.T @ (d - 1.0 / (1.0 + np.exp(-u))) / n

    def hess(b):
        p = 1.0 / (1.0 + np.exp(-(Z @ b)))
        return (Z.T * (p * (1 - p))) @ Z / n

    res = minimize(negll, np.zeros(Z.shape[1]), jac=grad, hess=hess, method="trust-exact",
                   options={"gtol": 1e-12})
    return res.x, -res.fun
