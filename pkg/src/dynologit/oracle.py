"""Brute-force enumeration over small models.

Every outcome path ``(y0, y1, y2, y3)`` in ``{1..J}^4`` is enumerated, so event
probabilities are exact sums rather than simulations.  This is a correctness
tool: it checks the alpha-free conditional logit form of the switching events
and the constructive moment identification of all parameters.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.special import expit, logit

from .core import ModelShape, Params, category_probabilities
from .events import CutoffPair, enumerate_cutoff_pairs
from .exceptions import AssumptionViolationError, InvalidParameterError, ZeroProbabilityEventError

MAX_J = 5
MAX_SUPPORT = 20
DEFAULT_ALPHA_GRID = (-2.0, -1.0, 0.0, 1.0, 2.0)


@lru_cache(maxsize=None)
def all_paths(J: int) -> np.ndarray:
    """Every outcome path, shape ``(J**4, 4)``, in lexicographic order."""
    paths = np.array(list(itertools.product(range(1, J + 1), repeat=4)), dtype=np.int64)
    paths.setflags(write=False)
    return paths


def uniform_p0(J: int) -> Callable:
    def p0(x, alpha):
        return np.full(J, 1.0 / J)

    return p0


@dataclass(frozen=True, eq=False)
class OracleModel:
    shape: ModelShape
    theta: Params
    x_support: tuple = ()
    x_probs: tuple = ()
    alpha_grid: tuple = DEFAULT_ALPHA_GRID
    alpha_probs: tuple = ()
    p0: Callable | None = None

    def __post_init__(self):
        shape = self.shape
        if shape.J > MAX_J:
            raise InvalidParameterError(f"oracle refuses J > {MAX_J}")
        if len(self.x_support) > MAX_SUPPORT:
            raise InvalidParameterError(f"oracle refuses more than {MAX_SUPPORT} support points")
        self.theta.check_shape(shape)
        if not self.theta.is_model_valid(shape):
            raise InvalidParameterError("oracle needs strictly increasing thresholds")
        support = tuple(np.asarray(x, dtype=float).reshape(3, shape.K) for x in self.x_support)
        object.__setattr__(self, "x_support", support)
        probs = tuple(self.x_probs) or (1.0 / max(len(support), 1),) * len(support)
        if support and (len(probs) != len(support) or abs(sum(probs) - 1.0) > 1e-12 or min(probs) < 0):
            raise InvalidParameterError("x_probs must be nonnegative and sum to 1")
        object.__setattr__(self, "x_probs", tuple(float(p) for p in probs))
        if not self.alpha_grid:
            raise InvalidParameterError("alpha_grid must be nonempty")
        object.__setattr__(self, "alpha_grid", tuple(float(a) for a in self.alpha_grid))
        aprobs = tuple(self.alpha_probs) or (1.0 / len(self.alpha_grid),) * len(self.alpha_grid)
        if len(aprobs) != len(self.alpha_grid) or abs(sum(aprobs) - 1.0) > 1e-12:
            raise InvalidParameterError("alpha_probs must match alpha_grid and sum to 1")
        object.__setattr__(self, "alpha_probs", tuple(float(p) for p in aprobs))
        if self.p0 is None:
            object.__setattr__(self, "p0", uniform_p0(shape.J))

    def with_theta(self, theta: Params) -> "OracleModel":
        return OracleModel(self.shape, theta, self.x_support, self.x_probs, self.alpha_grid, self.alpha_probs, self.p0)


def path_probabilities(model: OracleModel, x, alpha: float) -> np.ndarray:
    """Probability of every path in :func:`all_paths` given ``(x, alpha)``."""
    shape, theta = model.shape, model.theta
    x = np.asarray(x, dtype=float).reshape(3, shape.K)
    paths = all_paths(shape.J)
    gam = theta.gamma_full(shape)
    beta = np.asarray(theta.beta)
    p0 = np.asarray(model.p0(x, alpha), dtype=float)
    if p0.shape != (shape.J,) or np.any(p0 < 0) or abs(p0.sum() - 1.0) > 1e-12:
        raise InvalidParameterError("p0 must return a probability vector over 1..J")
    prob = p0[paths[:, 0] - 1]
    for t in (1, 2, 3):
        eta = alpha + (x[t - 1] @ beta if shape.K else 0.0) + theta.rho * (paths[:, t - 1] >= shape.k)
        cells = category_probabilities(eta, gam)
        prob = prob * cells[np.arange(paths.shape[0]), paths[:, t] - 1]
    return prob


def path_probability(model: OracleModel, x, alpha: float, y_path: Sequence[int]) -> float:
    J = model.shape.J
    y = tuple(int(v) for v in y_path)
    if len(y) != 4 or min(y) < 1 or max(y) > J:
        raise InvalidParameterError(f"invalid path {y_path} for J={J}")
    idx = 0
    for v in y:
        idx = idx * J + (v - 1)
    return float(path_probabilities(model, x, alpha)[idx])


def event_masks(shape: ModelShape, pair: CutoffPair, d0: int, d3: int):
    """Boolean masks over :func:`all_paths` for events A and B."""
    j, l = pair
    if not 2 <= j <= shape.k <= l <= shape.J:
        raise InvalidParameterError(f"pair {pair} violates 2 <= j <= k <= l <= J")
    P = all_paths(shape.J)
    k = shape.k
    start = (P[:, 0] >= k) == bool(d0)
    A = start & (P[:, 1] < k) & (P[:, 2] >= l) & ((P[:, 3] >= j) == bool(d3))
    B = start & (P[:, 1] >= k) & (P[:, 2] < j) & ((P[:, 3] >= l) == bool(d3))
    return A, B


def event_probabilities(model: OracleModel, x, alpha, pair, d0, d3) -> tuple[float, float]:
    """``(P(A | x), P(B | x))``; ``alpha=None`` mixes over the model's alpha grid."""
    A, B = event_masks(model.shape, CutoffPair(*pair), d0, d3)
    alphas = model.alpha_grid if alpha is None else (float(alpha),)
    weights = model.alpha_probs if alpha is None else (1.0,)
    pa = pb = 0.0
    for a, wa in zip(alphas, weights):
        pr = path_probabilities(model, x, a)
        pa += wa * pr[A].sum()
        pb += wa * pr[B].sum()
    return float(pa), float(pb)


def conditional_event_probability(model: OracleModel, x, alpha, pair, d0, d3) -> float:
    """Exact ``P(B | C, x, alpha)`` from path enumeration; ``alpha=None`` uses the alpha mixture."""
    pa, pb = event_probabilities(model, x, alpha, pair, d0, d3)
    if not pa + pb > 0:
        raise ZeroProbabilityEventError(f"P(C) = 0 for pair {tuple(pair)}, d0={d0}, d3={d3}")
    return pb / (pa + pb)


def closed_form_probability(theta: Params, shape: ModelShape, x, pair, d0, d3) -> float:
    """Logistic form ``Lambda(dx b + rho (d0 - d3) + (1 - d3) g_l + d3 g_j)`` with ``dx = x1 - x2``."""
    x = np.asarray(x, dtype=float).reshape(3, shape.K)
    j, l = pair
    gam = dict(zip(range(2, shape.J + 1), theta.gamma_full(shape)))
    dx = x[0] - x[1]
    u = (dx @ np.asarray(theta.beta) if shape.K else 0.0) + theta.rho * (d0 - d3) + (1 - d3) * gam[l] + d3 * gam[j]
    return float(expit(u))


def _stayers(model: OracleModel):
    pts = [(x, p) for x, p in zip(model.x_support, model.x_probs) if np.array_equal(x[1], x[2]) and p > 0]
    if not pts:
        raise AssumptionViolationError("support contains no stayers (X2 = X3)")
    return pts


def _cell_moments(model: OracleModel, pair, d0, d3):
    """Stayer ``dx`` rows, ``logit(P(B|C))`` and conditioning weights for one cell."""
    rows, targets, weights = [], [], []
    for x, px in _stayers(model):
        pa, pb = event_probabilities(model, x, None, pair, d0, d3)
        if not pa + pb > 0:
            continue
        rows.append(x[0] - x[1])
        targets.append(logit(pb / (pa + pb)))
        weights.append(px * (pa + pb))
    if not weights:
        raise AssumptionViolationError(f"empty conditioning cell for pair {tuple(pair)}, d0={d0}, d3={d3}")
    w = np.asarray(weights)
    return np.asarray(rows).reshape(len(w), model.shape.K), np.asarray(targets), w / w.sum()


def identify_from_population(model: OracleModel) -> Params:
    """Recover ``(beta, rho, gamma)`` from exact population conditional probabilities.

    beta solves the stayer moment ``E[dx'dx] beta = E[dx' logit p_kk(x, 0, 0)]``,
    then rho, gamma_l (l > k) and gamma_j (j < k) are means of the logit
    residuals in the cells ``(k,k,1,0)``, ``(k,l,0,0)`` and ``(j,k,1,1)``.
    """
    shape = model.shape
    k, K = shape.k, shape.K
    dx, lg, w = _cell_moments(model, (k, k), 0, 0)
    if K:
        M = (dx.T * w) @ dx
        if np.linalg.matrix_rank(M) < K or np.linalg.cond(M) > 1e12:
            raise AssumptionViolationError("stayer design moment E[dx'dx] is not invertible")
        beta = np.linalg.solve(M, (dx.T * w) @ lg)
    else:
        beta = np.zeros(0)

    def resid_mean(pair, d0, d3):
        dx_, lg_, w_ = _cell_moments(model, pair, d0, d3)
        return float(w_ @ (lg_ - (dx_ @ beta if K else 0.0)))

    rho = resid_mean((k, k), 1, 0)
    gamma = []
    for j in shape.free_thresholds:
        gamma.append(resid_mean((k, j), 0, 0) if j > k else resid_mean((j, k), 1, 1))
    return Params(tuple(beta), rho, tuple(gamma))


def random_model_valid_params(rng, shape: ModelShape, beta_scale=1.0, rho_range=(-1.0, 1.5), gap_range=(0.5, 2.0)) -> Params:
    """Draw a parameter with strictly increasing thresholds and ``gamma_k = 0``."""
    beta = rng.uniform(-beta_scale, beta_scale, shape.K)
    rho = rng.uniform(*rho_range)
    full = np.cumsum(rng.uniform(*gap_range, shape.J - 1))
    full = full - full[shape.k - 2]
    return Params(beta, rho, np.delete(full, shape.k - 2))


def all_cells(shape: ModelShape):
    """Every admissible ``(pair, d0, d3)`` combination."""
    return [(p, d0, d3) for p in enumerate_cutoff_pairs(shape) for d0 in (0, 1) for d3 in (0, 1)]
