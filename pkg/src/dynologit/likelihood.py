"""Composite conditional log-likelihood with analytic score and Hessian.

Each active cell ``(i, j, l)`` contributes a binary logit term

    w_i * [d1 * log Lambda(z theta_jl) + (1 - d1) * log(1 - Lambda(z theta_jl))]

with ``z = (dx, d0 - d3, 1 - d3, d3)`` and ``theta_jl = (beta, rho, gamma_l, gamma_j)``.
The per-cell coefficients are embedded in the global layout
``(beta_1..beta_K, rho, gamma_free ascending)``; ``gamma_k = 0`` slots drop out.
Value, score and Hessian are all scaled by ``1/n``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .core import ModelShape, PanelDataset, Params
from .events import BandwidthConfig, CellRecord, CellTable, build_cells
from .exceptions import NoInformationError


def log_logistic(u):
    """``log Lambda(u) = -softplus(-u)``, stable for large ``|u|``."""
    return -np.logaddexp(0.0, -np.asarray(u, dtype=float))


def log_one_minus_logistic(u):
    return -np.logaddexp(0.0, np.asarray(u, dtype=float))


@dataclass(frozen=True)
class DesignRow:
    z: np.ndarray  # (dx, d0 - d3, 1 - d3, d3)
    slot_l: int | None
    slot_j: int | None
    weight: float
    d1: int

    def global_row(self, n_params: int) -> np.ndarray:
        K = self.z.size - 3
        g = np.zeros(n_params)
        g[:K] = self.z[:K]
        g[K] = self.z[K]
        if self.slot_l is not None:
            g[self.slot_l] += self.z[K + 1]
        if self.slot_j is not None:
            g[self.slot_j] += self.z[K + 2]
        return g

    def index(self, theta) -> float:
        vec = _as_vector(theta)
        return float(self.global_row(vec.size) @ vec)


def _as_vector(theta) -> np.ndarray:
    return theta.to_vector() if isinstance(theta, Params) else np.asarray(theta, dtype=float)


def design_row(record: CellRecord, shape: ModelShape) -> DesignRow:
    j, l = record.pair
    d3 = record.d3jl
    z = np.concatenate([np.atleast_1d(np.asarray(record.dx, dtype=float)), [record.d0 - d3, 1 - d3, d3]])
    return DesignRow(z, shape.gamma_slot(l), shape.gamma_slot(j), float(record.weight), int(record.d1))


def cell_loglik(row: DesignRow, theta) -> float:
    if row.weight == 0:
        return 0.0
    u = row.index(theta)
    val = log_logistic(u) if row.d1 == 1 else log_one_minus_logistic(u)
    return float(row.weight * val)


def global_design(cells: CellTable, shape: ModelShape) -> np.ndarray:
    """Stack the embedded design rows of every cell into an ``(m, p)`` matrix."""
    m, K = len(cells), shape.K
    G = np.zeros((m, shape.n_params))
    G[:, :K] = cells.dx
    G[:, K] = cells.d0 - cells.d3jl
    rows = np.arange(m)
    for p, (j, l) in enumerate(cells.pairs):
        sel = cells.pair_index == p
        sl, sj = shape.gamma_slot(l), shape.gamma_slot(j)
        if sl is not None:
            G[rows[sel], sl] += 1 - cells.d3jl[sel]
        if sj is not None:
            G[rows[sel], sj] += cells.d3jl[sel]
    return G


class CompositeLikelihood:
    """Vectorised composite likelihood over a fixed dataset.

    ``multiplicity`` reweights individuals, which is how bootstrap resamples are
    evaluated without materialising duplicated spells.
    """

    def __init__(self, dataset: PanelDataset, cfg: BandwidthConfig | None = None, cells: CellTable | None = None,
                 multiplicity=None, active_pairs=None):
        self.shape = dataset.shape
        self.cfg = cfg or BandwidthConfig.exact_mode()
        self.cells = cells if cells is not None else build_cells(dataset, self.cfg)
        self.n = len(dataset)
        self.G = global_design(self.cells, self.shape)
        self.d1 = self.cells.d1.astype(float)
        self._set_weights(multiplicity, active_pairs)

    def _set_weights(self, multiplicity, active_pairs):
        w = self.cells.weight.astype(float)
        self.multiplicity = None if multiplicity is None else np.asarray(multiplicity, dtype=float)
        if self.multiplicity is not None:
            w = w * self.multiplicity[self.cells.owner]
        self.active_pairs = None if active_pairs is None else tuple(sorted(active_pairs))
        if self.active_pairs is not None:
            w = w * np.isin(self.cells.pair_index, np.asarray(self.active_pairs, dtype=np.int64))
        self.w = w

    def reweighted(self, multiplicity=None, active_pairs=None) -> "CompositeLikelihood":
        """Copy sharing the design matrix, with new individual multiplicities / active pairs."""
        new = object.__new__(CompositeLikelihood)
        new.__dict__.update(self.__dict__)
        new._set_weights(multiplicity, active_pairs)
        return new

    @property
    def total_weight(self) -> float:
        return float(self.w.sum())

    def pair_weights(self) -> np.ndarray:
        return np.bincount(self.cells.pair_index, weights=self.w, minlength=len(self.cells.pairs))

    def _check(self):
        if not self.total_weight > 0:
            raise NoInformationError("no spell contributes to any cutoff pair (no switching stayers)")

    def linear_index(self, theta) -> np.ndarray:
        return self.G @ _as_vector(theta)

    def loglik(self, theta) -> float:
        self._check()
        u = self.linear_index(theta)
        ll = np.where(self.d1 == 1, log_logistic(u), log_one_minus_logistic(u))
        return float(np.dot(self.w, ll) / self.n)

    def score(self, theta) -> np.ndarray:
        self._check()
        r = self.w * (self.d1 - expit(self.linear_index(theta)))
        return self.G.T @ r / self.n

    def hessian(self, theta) -> np.ndarray:
        self._check()
        lam = expit(self.linear_index(theta))
        c = self.w * lam * (1.0 - lam)
        H = -(self.G.T * c) @ self.G / self.n
        return 0.5 * (H + H.T)

    def evaluate(self, theta):
        """Value, score and Hessian in one pass."""
        self._check()
        u = self.linear_index(theta)
        lam = expit(u)
        ll = np.where(self.d1 == 1, log_logistic(u), log_one_minus_logistic(u))
        val = float(np.dot(self.w, ll) / self.n)
        g = self.G.T @ (self.w * (self.d1 - lam)) / self.n
        c = self.w * lam * (1.0 - lam)
        H = -(self.G.T * c) @ self.G / self.n
        return val, g, 0.5 * (H + H.T)

    def cell_scores(self, theta) -> np.ndarray:
        """Unscaled per-cell score contributions, shape ``(m, p)``."""
        r = self.w * (self.d1 - expit(self.linear_index(theta)))
        return self.G * r[:, None]

    def individual_scores(self, theta) -> np.ndarray:
        """Per-individual composite scores summed over pairs, shape ``(n, p)``."""
        out = np.zeros((self.n, self.shape.n_params))
        np.add.at(out, self.cells.owner, self.cell_scores(theta))
        return out

    def score_variance(self, theta) -> np.ndarray:
        """Mean outer product of individual composite scores (cross-pair terms included)."""
        s = self.individual_scores(theta)
        if self.multiplicity is None:
            return s.T @ s / self.n
        # s already carries one factor of the multiplicity c_i; the resample sum needs c_i s_i s_i'
        c = self.multiplicity
        inv = np.divide(1.0, c, out=np.zeros_like(c), where=c > 0)
        return (s.T * inv) @ s / self.n

    def pair_score_variances(self, theta) -> dict:
        """Per-pair mean outer products of the embedded scores (no cross terms)."""
        out = {}
        cs = self.cell_scores(theta)
        for p, pair in enumerate(self.cells.pairs):
            sel = self.cells.pair_index == p
            s = np.zeros((self.n, self.shape.n_params))
            np.add.at(s, self.cells.owner[sel], cs[sel])
            out[pair] = s.T @ s / self.n
        return out


def composite_loglik(dataset: PanelDataset, theta: Params, cfg: BandwidthConfig | None = None) -> float:
    return CompositeLikelihood(dataset, cfg).loglik(theta)


def composite_score(dataset: PanelDataset, theta: Params, cfg: BandwidthConfig | None = None) -> np.ndarray:
    return CompositeLikelihood(dataset, cfg).score(theta)


def composite_hessian(dataset: PanelDataset, theta: Params, cfg: BandwidthConfig | None = None) -> np.ndarray:
    return CompositeLikelihood(dataset, cfg).hessian(theta)
