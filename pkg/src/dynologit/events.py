"""Conditioning events, cutoff pairs and stayer weights.

For cutoffs ``2 <= j <= k <= l <= J`` a spell contributes to pair ``(j, l)`` when
it moves up across the cutoffs in the middle periods (``D_1(k) = 0`` and
``D_2(l) = 1``, an *A* path) or down (``D_1(k) = 1`` and ``D_2(j) = 0``, a *B*
path), and its covariates do not change between periods 2 and 3.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .core import CONTINUOUS, DISCRETE, ModelShape, PanelDataset, Spell, indicator
from .exceptions import InvalidParameterError

KERNELS = ("exact", "gaussian", "uniform")


class CutoffPair(NamedTuple):
    j: int
    l: int


@dataclass(frozen=True)
class BandwidthConfig:
    """Stayer weighting.  ``exact=True`` (or ``kernel="exact"``) uses ``1{X_2 = X_3}``."""

    h: float | None = None
    kernel: str = "exact"
    exact: bool = False

    def __post_init__(self):
        if self.kernel not in KERNELS:
            raise InvalidParameterError(f"kernel must be one of {KERNELS}, got {self.kernel!r}")
        if self.kernel == "exact":
            object.__setattr__(self, "exact", True)
        if not self.exact:
            if self.h is None or not self.h > 0:
                raise InvalidParameterError(f"bandwidth h must be positive in kernel mode, got {self.h}")

    @classmethod
    def exact_mode(cls) -> "BandwidthConfig":
        return cls(kernel="exact")


@dataclass(frozen=True)
class CellRecord:
    """One spell's contribution to one cutoff pair.

    ``dx`` is ``X_1 - X_2``, the covariate difference with the sign under which
    the conditional probability of a *B* path is ``Lambda(dx @ beta + ...)``.
    """

    spell_id: object
    pair: CutoffPair
    weight: float
    d1: int
    d0: int
    d3jl: int
    dx: np.ndarray


def enumerate_cutoff_pairs(shape: ModelShape) -> list[CutoffPair]:
    return [CutoffPair(j, l) for j in range(2, shape.k + 1) for l in range(shape.k, shape.J + 1)]


def _kernel(u, kernel):
    if kernel == "gaussian":
        return np.exp(-0.5 * u * u)
    return (np.abs(u) <= 1.0).astype(float)


def stayer_weights(X2, X3, cfg: BandwidthConfig, kinds: Sequence[str]) -> np.ndarray:
    """Vectorised stayer weight for arrays of shape ``(n, K)``."""
    X2 = np.asarray(X2, dtype=float)
    X3 = np.asarray(X3, dtype=float)
    if X2.shape != X3.shape:
        raise InvalidParameterError("x2 and x3 must have equal shapes")
    if X2.shape[-1] != len(kinds):
        raise InvalidParameterError("kinds must have one entry per covariate")
    w = np.ones(X2.shape[:-1])
    if cfg.exact:
        return np.all(X2 == X3, axis=-1).astype(float)
    for m, kind in enumerate(kinds):
        if kind == DISCRETE:
            w = w * (X2[..., m] == X3[..., m])
        elif kind == CONTINUOUS:
            w = w * _kernel((X2[..., m] - X3[..., m]) / cfg.h, cfg.kernel)
        else:
            raise InvalidParameterError(f"unknown covariate kind {kind!r}")
    return w


def stayer_weight(x2, x3, cfg: BandwidthConfig, kinds: Sequence[str]) -> float:
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    x3 = np.atleast_1d(np.asarray(x3, dtype=float))
    return float(stayer_weights(x2[None, :], x3[None, :], cfg, kinds)[0])


def classify(spell: Spell, pair: CutoffPair, shape: ModelShape, cfg: BandwidthConfig, kinds) -> CellRecord | None:
    j, l = pair
    if not 2 <= j <= shape.k <= l <= shape.J:
        raise InvalidParameterError(f"pair {pair} violates 2 <= j <= k <= l <= J")
    y0, y1, y2, y3 = spell.y
    d1 = indicator(y1, shape.k)
    if d1 == 0:
        member = indicator(y2, l) == 1
        d3 = indicator(y3, j)
    else:
        member = indicator(y2, j) == 0
        d3 = indicator(y3, l)
    if not member:
        return None
    x = spell.x
    w = stayer_weight(x[1], x[2], cfg, kinds)
    if w <= 0.0:
        return None
    return CellRecord(spell.id, CutoffPair(j, l), w, d1, indicator(y0, shape.k), d3, x[0] - x[1])


@dataclass(frozen=True, eq=False)
class CellTable:
    """All nonzero-weight (spell, pair) cells of a dataset, column-wise.

    ``owner`` indexes spells in the dataset; ``pair_index`` indexes ``pairs``.
    """

    pairs: tuple[CutoffPair, ...]
    n: int
    owner: np.ndarray
    pair_index: np.ndarray
    weight: np.ndarray
    d1: np.ndarray
    d0: np.ndarray
    d3jl: np.ndarray
    dx: np.ndarray

    def __len__(self):
        return self.owner.size

    def records(self, ids=None):
        for c in range(len(self)):
            sid = self.owner[c] if ids is None else ids[self.owner[c]]
            yield CellRecord(
                sid, self.pairs[self.pair_index[c]], float(self.weight[c]),
                int(self.d1[c]), int(self.d0[c]), int(self.d3jl[c]), self.dx[c],
            )

    def pair_weights(self) -> dict[CutoffPair, float]:
        tot = np.bincount(self.pair_index, weights=self.weight, minlength=len(self.pairs))
        return {p: float(tot[i]) for i, p in enumerate(self.pairs)}


def build_cells(dataset: PanelDataset, cfg: BandwidthConfig) -> CellTable:
    """Classify every spell against every cutoff pair."""
    shape = dataset.shape
    pairs = tuple(enumerate_cutoff_pairs(shape))
    Y, X = dataset.Y, dataset.X
    w_stay = stayer_weights(X[:, 1, :], X[:, 2, :], cfg, dataset.covariate_kind)
    d1 = (Y[:, 1] >= shape.k).astype(np.int64)
    d0 = (Y[:, 0] >= shape.k).astype(np.int64)
    dx_all = X[:, 0, :] - X[:, 1, :]
    owners, pidx, weights, d1s, d0s, d3s = [], [], [], [], [], []
    for p, (j, l) in enumerate(pairs):
        up = (d1 == 0) & (Y[:, 2] >= l)
        down = (d1 == 1) & (Y[:, 2] < j)
        keep = (up | down) & (w_stay > 0)
        idx = np.flatnonzero(keep)
        d3 = np.where(d1[idx] == 0, Y[idx, 3] >= j, Y[idx, 3] >= l).astype(np.int64)
        owners.append(idx)
        pidx.append(np.full(idx.size, p, dtype=np.int64))
        weights.append(w_stay[idx])
        d1s.append(d1[idx])
        d0s.append(d0[idx])
        d3s.append(d3)
    owner = np.concatenate(owners)
    return CellTable(
        pairs, len(dataset), owner, np.concatenate(pidx), np.concatenate(weights),
        np.concatenate(d1s), np.concatenate(d0s), np.concatenate(d3s), dx_all[owner],
    )
