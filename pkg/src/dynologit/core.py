"""Domain types and the data-generating process of the dynamic ordered logit.

The latent index for individual ``i`` in period ``t = 1, 2, 3`` is

    Y*_it = alpha_i + X_it beta + rho * 1{Y_i,t-1 >= k} - U_it,   U_it ~ Logistic(0, 1)

and the observed outcome is ``Y_it = j`` when ``gamma_j <= Y*_it < gamma_{j+1}``
with ``gamma_1 = -inf`` and ``gamma_{J+1} = +inf``.  The scale is fixed by
``gamma_k = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit

from .exceptions import EmptyDatasetError, InvalidParameterError

DISCRETE = "discrete"
CONTINUOUS = "continuous"
N_PERIODS = 4  # t = 0, 1, 2, 3


@dataclass(frozen=True)
class ModelShape:
    """Number of categories ``J``, covariates ``K`` and lag cutoff ``k``."""

    J: int
    K: int
    k: int

    def __post_init__(self):
        if self.J < 2:
            raise InvalidParameterError(f"J must be >= 2, got {self.J}")
        if not 2 <= self.k <= self.J:
            raise InvalidParameterError(f"k must satisfy 2 <= k <= J, got k={self.k}, J={self.J}")
        if self.K < 0:
            raise InvalidParameterError(f"K must be >= 0, got {self.K}")

    @property
    def free_thresholds(self) -> tuple[int, ...]:
        """Category indices ``j`` whose threshold is estimated (all but ``k``)."""
        return tuple(j for j in range(2, self.J + 1) if j != self.k)

    @property
    def n_params(self) -> int:
        return self.K + 1 + (self.J - 2)

    def gamma_slot(self, j: int) -> int | None:
        """Global index of ``gamma_j``; ``None`` for the normalized ``gamma_k``."""
        if j == self.k:
            return None
        return self.K + 1 + self.free_thresholds.index(j)

    def param_names(self, covariate_names: Sequence[str] | None = None) -> list[str]:
        if covariate_names is None:
            covariate_names = [f"x{m + 1}" for m in range(self.K)]
        names = [f"beta_{c}" for c in covariate_names]
        names.append("rho")
        names.extend(f"gamma_{j}" for j in self.free_thresholds)
        return names


@dataclass(frozen=True)
class Params:
    """Parameter vector ``(beta, rho, gamma_free)`` with ``gamma_k = 0`` implied.

    ``gamma_free`` lists the thresholds for ``j in {2..J} \\ {k}`` in ascending ``j``.
    """

    beta: tuple[float, ...]
    rho: float
    gamma_free: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "beta", tuple(np.ravel(self.beta).astype(float).tolist()))
        object.__setattr__(self, "rho", float(self.rho))
        object.__setattr__(self, "gamma_free", tuple(np.ravel(self.gamma_free).astype(float).tolist()))
        if not np.all(np.isfinite(self.to_vector())):
            raise InvalidParameterError("parameters must be finite")

    @classmethod
    def zeros(cls, shape: ModelShape) -> "Params":
        return cls((0.0,) * shape.K, 0.0, (0.0,) * (shape.J - 2))

    @classmethod
    def from_vector(cls, vec, shape: ModelShape) -> "Params":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (shape.n_params,):
            raise InvalidParameterError(f"expected {shape.n_params} parameters, got shape {vec.shape}")
        return cls(tuple(vec[: shape.K]), vec[shape.K], tuple(vec[shape.K + 1 :]))

    def to_vector(self) -> np.ndarray:
        return np.array([*self.beta, self.rho, *self.gamma_free], dtype=float)

    def check_shape(self, shape: ModelShape) -> None:
        if len(self.beta) != shape.K or len(self.gamma_free) != shape.J - 2:
            raise InvalidParameterError(
                f"Params has K={len(self.beta)}, {len(self.gamma_free)} free thresholds; "
                f"shape needs K={shape.K}, {shape.J - 2}"
            )

    def gamma_full(self, shape: ModelShape) -> np.ndarray:
        """Thresholds ``(gamma_2, ..., gamma_J)`` with ``gamma_k = 0`` inserted."""
        self.check_shape(shape)
        g = list(self.gamma_free)
        g.insert(shape.k - 2, 0.0)
        return np.array(g, dtype=float)

    def is_model_valid(self, shape: ModelShape) -> bool:
        return bool(np.all(np.diff(self.gamma_full(shape)) > 0))


@dataclass(frozen=True)
class Spell:
    """One individual's outcomes ``y`` for t = 0..3 and covariates ``x`` for t = 1..3."""

    id: object
    y: tuple[int, int, int, int]
    x: np.ndarray  # (3, K)

    def __post_init__(self):
        y = tuple(int(v) for v in self.y)
        if len(y) != N_PERIODS:
            raise InvalidParameterError(f"a spell needs {N_PERIODS} outcomes, got {len(y)}")
        x = np.array(self.x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(3, -1)
        if x.shape[0] != 3:
            raise InvalidParameterError("a spell needs covariates for exactly 3 periods")
        x.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "x", x)


@dataclass(frozen=True, eq=False)
class PanelDataset:
    """Balanced 4-period panel stored column-wise.

    ``Y`` has shape ``(n, 4)`` with integer outcomes in ``1..J``; ``X`` has shape
    ``(n, 3, K)`` with covariates for periods 1..3.
    """

    shape: ModelShape
    ids: np.ndarray
    Y: np.ndarray
    X: np.ndarray
    covariate_names: tuple[str, ...] = ()
    covariate_kind: tuple[str, ...] = ()

    def __post_init__(self):
        Y = np.array(self.Y, dtype=np.int64)
        X = np.array(self.X, dtype=float)
        n = Y.shape[0] if Y.ndim == 2 else -1
        if Y.ndim != 2 or Y.shape[1] != N_PERIODS:
            raise InvalidParameterError(f"Y must have shape (n, 4), got {Y.shape}")
        if X.ndim == 2 and self.shape.K == 1:
            X = X[:, :, None]
        if X.shape != (n, 3, self.shape.K):
            raise InvalidParameterError(f"X must have shape ({n}, 3, {self.shape.K}), got {X.shape}")
        if n and (Y.min() < 1 or Y.max() > self.shape.J):
            raise InvalidParameterError(f"outcomes must lie in 1..{self.shape.J}")
        ids = np.arange(n) if self.ids is None else np.array(self.ids)
        if ids.shape != (n,):
            raise InvalidParameterError("ids must have one entry per spell")
        names = tuple(self.covariate_names) or tuple(f"x{m + 1}" for m in range(self.shape.K))
        kinds = tuple(self.covariate_kind) or (DISCRETE,) * self.shape.K
        if len(names) != self.shape.K or len(kinds) != self.shape.K:
            raise InvalidParameterError("covariate_names and covariate_kind must have length K")
        bad = [kd for kd in kinds if kd not in (DISCRETE, CONTINUOUS)]
        if bad:
            raise InvalidParameterError(f"unknown covariate kind(s) {bad}")
        for arr in (Y, X, ids):
            arr.setflags(write=False)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "covariate_names", names)
        object.__setattr__(self, "covariate_kind", kinds)

    @classmethod
    def from_spells(cls, shape, spells, covariate_names=(), covariate_kind=()):
        spells = list(spells)
        Y = np.array([s.y for s in spells], dtype=np.int64).reshape(len(spells), N_PERIODS)
        X = np.array([s.x for s in spells], dtype=float).reshape(len(spells), 3, shape.K)
        ids = np.empty(len(spells), dtype=object)
        ids[:] = [s.id for s in spells]
        return cls(shape, ids, Y, X, covariate_names, covariate_kind)

    def __len__(self):
        return self.Y.shape[0]

    @property
    def n(self) -> int:
        return len(self)

    @property
    def spells(self):
        for i in range(len(self)):
            yield Spell(self.ids[i], tuple(self.Y[i]), self.X[i])

    def subset(self, index) -> "PanelDataset":
        index = np.asarray(index)
        return PanelDataset(
            self.shape, self.ids[index], self.Y[index], self.X[index], self.covariate_names, self.covariate_kind
        )

    def shifted(self, offset) -> "PanelDataset":
        """Copy with ``offset`` added to every covariate observation."""
        return PanelDataset(
            self.shape, self.ids, self.Y, self.X + np.asarray(offset, dtype=float), self.covariate_names, self.covariate_kind
        )


# --------------------------------------------------------------------------
# fixed-effect and covariate generators

@dataclass(frozen=True)
class ConstantAlpha:
    c: float = 0.0

    def draw(self, rng, xbar):
        return np.full(xbar.shape[0], float(self.c))


@dataclass(frozen=True)
class GaussianAlpha:
    mean: float = 0.0
    sd: float = 1.0

    def __post_init__(self):
        if self.sd < 0:
            raise InvalidParameterError("sd must be nonnegative")

    def draw(self, rng, xbar):
        return self.mean + self.sd * rng.standard_normal(xbar.shape[0])


@dataclass(frozen=True)
class CorrelatedAlpha:
    """``alpha_i = loading * mean(X_i) + N(0, 1)``; the mean runs over t = 1..3 and all covariates."""

    loading: float = 1.0

    def draw(self, rng, xbar):
        return self.loading * xbar + rng.standard_normal(xbar.shape[0])


@dataclass(frozen=True)
class Bernoulli:
    p: float = 0.5
    kind = DISCRETE

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise InvalidParameterError(f"Bernoulli p must lie in (0, 1), got {self.p}")

    def draw(self, rng, size):
        return (rng.random(size) < self.p).astype(float)


@dataclass(frozen=True)
class DiscreteUniform:
    levels: tuple[float, ...] = (0.0, 1.0)
    kind = DISCRETE

    def __post_init__(self):
        levels = self.levels
        if isinstance(levels, (int, np.integer)):
            levels = tuple(range(int(levels)))
        levels = tuple(float(v) for v in levels)
        if not levels:
            raise InvalidParameterError("DiscreteUniform needs at least one level")
        object.__setattr__(self, "levels", levels)

    def draw(self, rng, size):
        return np.asarray(self.levels)[rng.integers(0, len(self.levels), size)]


@dataclass(frozen=True)
class Gaussian:
    mean: float = 0.0
    sd: float = 1.0
    kind = CONTINUOUS

    def __post_init__(self):
        if self.sd <= 0:
            raise InvalidParameterError("sd must be positive")

    def draw(self, rng, size):
        return self.mean + self.sd * rng.standard_normal(size)


def parse_alpha_scheme(text: str):
    """Parse ``constant:c``, ``gaussian:mean,sd`` or ``correlated:loading``."""
    name, _, args = text.partition(":")
    vals = [float(a) for a in args.split(",") if a.strip()] if args else []
    if name == "constant":
        return ConstantAlpha(*vals)
    if name == "gaussian":
        return GaussianAlpha(*vals)
    if name in ("correlated", "covariate_correlated"):
        return CorrelatedAlpha(*vals)
    raise InvalidParameterError(f"unknown alpha scheme {text!r}")


def parse_covariate_scheme(text: str):
    """Parse ``bernoulli:p``, ``uniform:a;b;c``, ``uniform:L`` or ``gaussian:mean;sd``."""
    name, _, args = text.partition(":")
    vals = [float(a) for a in args.replace(";", " ").replace("|", " ").split()] if args else []
    if name == "bernoulli":
        return Bernoulli(*vals)
    if name in ("uniform", "discrete_uniform"):
        if len(vals) == 1 and float(vals[0]).is_integer() and vals[0] > 1:
            return DiscreteUniform(int(vals[0]))
        return DiscreteUniform(tuple(vals) if vals else (0.0, 1.0))
    if name == "gaussian":
        return Gaussian(*vals)
    raise InvalidParameterError(f"unknown covariate scheme {text!r}")


@dataclass(frozen=True)
class DgpConfig:
    shape: ModelShape
    theta: Params
    alpha_scheme: object = field(default_factory=ConstantAlpha)
    covariate_scheme: tuple = ()
    burn_in: int = 20
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "covariate_scheme", tuple(self.covariate_scheme))
        if len(self.covariate_scheme) != self.shape.K:
            raise InvalidParameterError(f"need {self.shape.K} covariate generators, got {len(self.covariate_scheme)}")
        if self.burn_in < 0:
            raise InvalidParameterError("burn_in must be >= 0")
        self.theta.check_shape(self.shape)
        if not self.theta.is_model_valid(self.shape):
            raise InvalidParameterError(
                f"thresholds must be strictly increasing, got {self.theta.gamma_full(self.shape).tolist()}"
            )

    @property
    def covariate_kind(self) -> tuple[str, ...]:
        return tuple(g.kind for g in self.covariate_scheme)


# --------------------------------------------------------------------------
# model primitives

def indicator(y, j):
    """``1{y >= j}`` as an int (vectorised over arrays)."""
    out = np.asarray(y) >= j
    return out.astype(np.int64) if isinstance(out, np.ndarray) and out.ndim else int(out)


def _check_thresholds(gamma_full) -> np.ndarray:
    g = np.atleast_1d(np.asarray(gamma_full, dtype=float))
    if np.any(np.diff(g) <= 0) or not np.all(np.isfinite(g)):
        raise InvalidParameterError(f"thresholds must be finite and strictly increasing, got {g.tolist()}")
    return g


def cumulative_probability(eta, j, gamma_full):
    """``P(Y >= j | eta)`` for ``j`` in ``1..J+1``."""
    g = np.asarray(gamma_full, dtype=float)
    J = g.size + 1
    if j <= 1:
        return np.ones_like(np.asarray(eta, dtype=float))
    if j > J:
        return np.zeros_like(np.asarray(eta, dtype=float))
    return expit(np.asarray(eta, dtype=float) - g[j - 2])


def category_probability(eta, j, gamma_full):
    """Single-period ordered logit probability ``P(Y = j | eta)``.

    ``gamma_full`` holds the ``J - 1`` thresholds ``(gamma_2, ..., gamma_J)``.
    """
    g = _check_thresholds(gamma_full)
    J = g.size + 1
    if not 1 <= j <= J:
        raise InvalidParameterError(f"category {j} outside 1..{J}")
    p = _cell_probability(np.asarray(eta, dtype=float), j, g)
    return float(p) if p.ndim == 0 else p


def _cell_probability(eta, j, g):
    J = g.size + 1
    if j == 1:
        return expit(g[0] - eta)
    if j == J:
        return expit(eta - g[-1])
    a, b = eta - g[j - 2], eta - g[j - 1]
    # Lambda(a) - Lambda(b) without cancellation
    return expit(a) * expit(-b) * -np.expm1(b - a)


def category_probabilities(eta, gamma_full) -> np.ndarray:
    """All ``J`` cell probabilities, stacked on a trailing axis."""
    g = _check_thresholds(gamma_full)
    eta = np.asarray(eta, dtype=float)
    return np.stack([_cell_probability(eta, j, g) for j in range(1, g.size + 2)], axis=-1)


def draw_outcome(latent, gamma_full):
    """Map latent values to categories ``1 + #{j : latent >= gamma_j}``."""
    return 1 + np.searchsorted(np.asarray(gamma_full), latent, side="right")


def _logistic_draws(rng, size):
    u = rng.random(size)
    u = np.clip(u, np.finfo(float).tiny, 1.0 - np.finfo(float).epsneg)
    return np.log(u / (1.0 - u))


SIM_BLOCK = 4096


def _simulate_block(config: DgpConfig, block: int):
    shape, theta = config.shape, config.theta
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(block,)))
    m, B, K = SIM_BLOCK, config.burn_in, shape.K
    n_t = B + 1 + 3  # covariates for t = -B..0 and 1..3
    X = np.empty((n_t, m, K))
    for c, gen in enumerate(config.covariate_scheme):
        X[:, :, c] = gen.draw(rng, (n_t, m))
    xbar = X[-3:].mean(axis=(0, 2)) if K else np.zeros(m)
    alpha = config.alpha_scheme.draw(rng, xbar)
    y = rng.integers(1, shape.J + 1, m)
    U = _logistic_draws(rng, (n_t, m))
    beta = np.asarray(theta.beta)
    gam = theta.gamma_full(shape)
    # array index t corresponds to calendar period t - B
    Y = np.empty((4, m), dtype=np.int64)
    if B == 0:
        Y[0] = y
    for t in range(1, n_t):
        eta = alpha + (X[t] @ beta if K else 0.0) + theta.rho * (y >= shape.k)
        y = draw_outcome(eta - U[t], gam)
        if t >= B:
            Y[t - B] = y
    return Y.T, X[B:].transpose(1, 0, 2)


def simulate(config: DgpConfig, n: int, return_period0: bool = False):
    """Draw ``n`` spells from the model.

    Spells are generated in fixed-size blocks, each with its own seed substream,
    so spell ``i`` depends only on ``(seed, i)``.  ``Y_0`` is the outcome after
    ``burn_in`` transitions from a uniform start.  With ``return_period0`` the
    period-0 covariates are returned alongside the dataset.
    """
    if n < 1:
        raise EmptyDatasetError("n must be >= 1")
    n_blocks = -(-n // SIM_BLOCK)
    Ys, Xs = [], []
    for b in range(n_blocks):
        Yb, Xb = _simulate_block(config, b)
        Ys.append(Yb)
        Xs.append(Xb)
    Y = np.concatenate(Ys)[:n]
    X = np.concatenate(Xs)[:n]
    names = tuple(f"x{m + 1}" for m in range(config.shape.K))
    ds = PanelDataset(config.shape, np.arange(n), Y, X[:, 1:, :], names, config.covariate_kind)
    if return_period0:
        return ds, X[:, 0, :]
    return ds
