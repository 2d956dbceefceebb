"""Input validation for array-based panels."""

from __future__ import annotations

import numpy as np

from .core import CONTINUOUS, DISCRETE


def check_panel(X, y, n_categories=None):
    """Validate a 4-period panel given as arrays.

    ``X`` is ``(n, 3, K)`` (or ``(n, 3)`` for one covariate) holding covariates
    for periods 1..3; ``y`` is ``(n, 4)`` with integer outcomes for periods 0..3.
    Returns ``(X, y, J)`` with ``X`` float ``(n, 3, K)`` and ``y`` int64.
    """
    y = np.asarray(y)
    if y.ndim != 2 or y.shape[1] != 4:
        raise ValueError(f"y must have shape (n_individuals, 4), got {y.shape}")
    if y.shape[0] == 0:
        raise ValueError("empty panel: at least one individual required")
    if not np.all(np.isfinite(y.astype(float))) or np.any(y != np.round(y)):
        raise ValueError("y must contain integer category labels")
    y = y.astype(np.int64)
    if X is None:
        X = np.zeros((y.shape[0], 3, 0))
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        X = X[:, :, None]
    if X.ndim != 3 or X.shape[:2] != (y.shape[0], 3):
        raise ValueError(f"X must have shape (n_individuals, 3, n_features), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("X contains NaN or infinite values")
    J = int(y.max()) if n_categories is None else int(n_categories)
    if y.min() < 1 or y.max() > J:
        raise ValueError(f"categories must lie in 1..{J}")
    return X, y, J


def check_covariate_kind(kind, K):
    if kind is None:
        return (DISCRETE,) * K
    if isinstance(kind, str):
        kind = (kind,) * K
    kind = tuple(kind)
    if len(kind) != K or any(k not in (DISCRETE, CONTINUOUS) for k in kind):
        raise ValueError(f"covariate_kind must list {K} entries from {{'discrete', 'continuous'}}")
    return kind
