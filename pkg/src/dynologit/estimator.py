"""Composite conditional ML estimation, sandwich and bootstrap inference, pooled baseline."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit, logit

from .core import ModelShape, PanelDataset, Params
from .events import BandwidthConfig
from .exceptions import (
    EstimationError,
    InvalidParameterError,
    NoInformationError,
    SeparationError,
    SingularHessianError,
    UnreliableBootstrapError,
)
from .likelihood import CompositeLikelihood, log_logistic

logger = logging.getLogger(__name__)

COND_LIMIT = 1e12
SATURATION = 15.0  # |index| beyond which a cell probability is within 3e-7 of 0 or 1


@dataclass(frozen=True)
class FitConfig:
    tol_grad: float = 1e-8
    tol_step: float = 1e-10
    max_iter: int = 100
    init: Params | None = None
    bandwidth: BandwidthConfig = field(default_factory=BandwidthConfig.exact_mode)
    min_cell_weight: float = 10.0
    max_halvings: int = 30
    divergence_bound: float = 1e6

    def __post_init__(self):
        if not (self.tol_grad > 0 and self.tol_step > 0):
            raise InvalidParameterError("tolerances must be positive")
        if self.max_iter < 1:
            raise InvalidParameterError("max_iter must be >= 1")
        if self.min_cell_weight < 0:
            raise InvalidParameterError("min_cell_weight must be >= 0")

    def echo(self) -> dict:
        bw = self.bandwidth
        return {
            "tol_grad": self.tol_grad,
            "tol_step": self.tol_step,
            "max_iter": self.max_iter,
            "min_cell_weight": self.min_cell_weight,
            "kernel": bw.kernel,
            "h": bw.h,
            "init": None if self.init is None else self.init.to_vector().tolist(),
        }


@dataclass
class FitResult:
    """Point estimates, variance and diagnostics of one fit.

    ``estimates`` and ``vcov`` follow ``param_names``.  Parameters held at
    their initial value (unidentified) have ``NaN`` rows/columns in ``vcov``.
    """

    model: str
    param_names: list
    estimates: np.ndarray
    vcov: np.ndarray
    loglik: float
    iterations: int
    converged: bool
    stop_reason: str
    n: int
    shape: ModelShape
    cell_counts: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    free: np.ndarray | None = None
    config: dict = field(default_factory=dict)
    trace: list = field(default_factory=list)

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.vcov), 0.0, None))

    @property
    def theta_hat(self) -> Params:
        if self.model != "ccmle":
            raise AttributeError("theta_hat is defined for composite conditional fits only")
        return Params.from_vector(self.estimates, self.shape)

    def ci(self, level: float = 0.95):
        from scipy.stats import norm

        z = norm.ppf(0.5 + level / 2)
        return self.estimates - z * self.se, self.estimates + z * self.se

    def table(self) -> str:
        lo, hi = self.ci()
        lines = [f"{'parameter':<16}{'estimate':>12}{'se':>12}{'ci_low':>12}{'ci_high':>12}"]
        for name, est, se, a, b in zip(self.param_names, self.estimates, self.se, lo, hi):
            lines.append(f"{name:<16}{est:>12.5f}{se:>12.5f}{a:>12.5f}{b:>12.5f}")
        return "\n".join(lines)


# --------------------------------------------------------------------------
# damped Newton-Raphson

@dataclass
class NewtonOutcome:
    x: np.ndarray
    value: float
    grad: np.ndarray
    hess: np.ndarray
    iterations: int
    converged: bool
    stop_reason: str
    trace: list


def _newton_direction(H: np.ndarray, g: np.ndarray, names) -> np.ndarray:
    """Solve ``H d = -g`` for negative (semi)definite ``H``; one ridge retry."""
    A = -H
    if _well_conditioned(A):
        return np.linalg.solve(A, g)
    lam = 1e-8 * np.abs(np.diag(A)).sum() / A.shape[0]
    A2 = A + lam * np.eye(A.shape[0])
    if lam > 0 and _well_conditioned(A2):
        return np.linalg.solve(A2, g)
    raise SingularHessianError(
        f"Hessian singular after ridge regularization; weakly determined: {_weak_slots(A, names)}",
        _weak_slots(A, names),
    )


def _well_conditioned(A: np.ndarray) -> bool:
    if not np.all(np.isfinite(A)):
        return False
    try:
        return bool(np.linalg.cond(A) < COND_LIMIT)
    except np.linalg.LinAlgError:
        return False


def _weak_slots(A: np.ndarray, names) -> list:
    if A.size == 0:
        return []
    vals, vecs = np.linalg.eigh(0.5 * (A + A.T))
    # every near-null direction, not only the smallest one
    null = vals <= max(vals[0], 0.0) + 1e-12 * max(np.abs(vals).max(), np.finfo(float).tiny)
    load = (vecs[:, null] ** 2).sum(axis=1)
    return [names[i] for i in np.flatnonzero(load > 0.01 * load.max())]


def newton_maximize(fun: Callable, x0, free=None, *, tol_grad=1e-8, tol_step=1e-10, max_iter=100,
                    max_halvings=30, divergence_bound=1e6, names=None) -> NewtonOutcome:
    """Maximise a concave ``fun(x) -> (value, grad, hess)`` over the ``free`` coordinates.

    Each Newton step is halved until the objective does not decrease; steps
    that leave the value unchanged are only accepted if they shrink the gradient.
    """
    x = np.array(x0, dtype=float)
    free = np.ones(x.size, bool) if free is None else np.asarray(free, bool)
    names = names or [f"p{i}" for i in range(x.size)]
    fnames = [n for n, f in zip(names, free) if f]
    f, g, H = fun(x)
    trace = [f]
    stop = "max_iter"
    it = 0
    for it in range(1, max_iter + 1):
        gf = g[free]
        if np.max(np.abs(gf), initial=0.0) <= tol_grad:
            stop, it = "gradient", it - 1
            break
        d = np.zeros_like(x)
        d[free] = _newton_direction(H[np.ix_(free, free)], gf, fnames)
        t = 1.0
        for _ in range(max_halvings + 1):
            x_new = x + t * d
            f_new, g_new, H_new = fun(x_new)
            if np.isfinite(f_new) and (
                f_new > f or (f_new == f and np.max(np.abs(g_new[free])) < np.max(np.abs(gf)))
            ):
                break
            t *= 0.5
        else:
            stop = "line_search"
            break
        x, f, g, H = x_new, f_new, g_new, H_new
        trace.append(f)
        if np.max(np.abs(x)) > divergence_bound:
            raise SeparationError(
                f"parameter norm exceeded {divergence_bound:g} (suspected separation): "
                f"{[names[i] for i in np.flatnonzero(np.abs(x) > divergence_bound)]}"
            )
        if np.max(np.abs(t * d)) <= tol_step:
            stop = "step"
            break
    converged = bool(np.max(np.abs(g[free]), initial=0.0) <= tol_grad)
    return NewtonOutcome(x, f, g, H, it, converged, stop, trace)


# --------------------------------------------------------------------------
# composite conditional ML

def _identification(lik: CompositeLikelihood, cfg: FitConfig, names):
    """Active pairs, free-parameter mask, and warnings for one likelihood."""
    shape = lik.shape
    warns = []
    pw = lik.pair_weights()
    active = [p for p, w in enumerate(pw) if w >= cfg.min_cell_weight and w > 0]
    for p, w in enumerate(pw):
        if p not in active and w > 0:
            j, l = lik.cells.pairs[p]
            warns.append(f"pair ({j},{l}) dropped: effective weight {w:.3g} < {cfg.min_cell_weight:g}")
    if not active:
        raise NoInformationError(
            "no cutoff pair has enough switching stayers"
            + (f" (largest effective weight {pw.max():.3g})" if pw.size and pw.max() > 0 else "")
        )
    lik = lik.reweighted(lik.multiplicity, active) if len(active) < len(pw) else lik
    colmass = (lik.w[:, None] * lik.G**2).sum(axis=0)
    free = np.ones(shape.n_params, bool)
    for j in shape.free_thresholds:
        s = shape.gamma_slot(j)
        if colmass[s] == 0:
            free[s] = False
            warns.append(f"{names[s]} unidentified (no active cell carries it); held at initial value")
    M = (lik.G[:, free].T * lik.w) @ lik.G[:, free] / lik.n
    if not _well_conditioned(M):
        fnames = [n for n, f in zip(names, free) if f]
        slots = _weak_slots(M, fnames)
        raise SingularHessianError(f"design second-moment matrix is singular; weakly determined: {slots}", slots)
    return lik, active, free, warns


def _sandwich(lik: CompositeLikelihood, x: np.ndarray, free: np.ndarray, names) -> np.ndarray:
    p = x.size
    H = lik.hessian(x)[np.ix_(free, free)]
    Om = lik.score_variance(x)[np.ix_(free, free)]
    if not _well_conditioned(-H):
        fnames = [n for n, f in zip(names, free) if f]
        slots = _weak_slots(-H, fnames)
        raise SingularHessianError(f"Hessian singular at the estimate; weakly determined: {slots}", slots)
    Hinv = np.linalg.inv(H)
    V = Hinv @ Om @ Hinv / lik.n
    out = np.full((p, p), np.nan)
    out[np.ix_(free, free)] = 0.5 * (V + V.T)
    return out


def _separating_direction(lik: CompositeLikelihood, free: np.ndarray):
    """Direction ``v`` along which every active cell's log-likelihood is nondecreasing, or None.

    Such a direction exists iff the maximum is not attained (complete or
    quasi-complete separation).  Solved as an LP on the distinct signed rows.
    """
    from scipy.optimize import linprog

    A = ((2.0 * lik.d1 - 1.0)[:, None] * lik.G)[lik.w > 0][:, free]
    A = np.unique(A, axis=0)
    res = linprog(-A.sum(axis=0), A_ub=-A, b_ub=np.zeros(len(A)), bounds=[(-1.0, 1.0)] * A.shape[1], method="highs")
    if res.status != 0 or -res.fun <= 1e-6 * max(1.0, np.abs(A).max()):
        return None
    return res.x


def _fit_likelihood(lik: CompositeLikelihood, cfg: FitConfig, names, want_vcov=True):
    shape = lik.shape
    lik, active, free, warns = _identification(lik, cfg, names)
    x0 = (cfg.init or Params.zeros(shape)).to_vector()
    out = newton_maximize(
        lik.evaluate, x0, free, tol_grad=cfg.tol_grad, tol_step=cfg.tol_step, max_iter=cfg.max_iter,
        max_halvings=cfg.max_halvings, divergence_bound=cfg.divergence_bound, names=names,
    )
    # the gradient test fires long before the norm bound when the likelihood keeps rising
    # towards a supremum; saturated indices trigger an exact check
    u = lik.linear_index(out.x)[lik.w > 0]
    if not out.converged or np.max(np.abs(u), initial=0.0) > SATURATION:
        v = _separating_direction(lik, free)
        if v is not None:
            fnames = [n for n, f in zip(names, free) if f]
            raise SeparationError(
                f"maximum not attained (separation); diverging along {[fnames[i] for i in np.flatnonzero(np.abs(v) > 1e-8)]}"
            )
    vcov = _sandwich(lik, out.x, free, names) if want_vcov else None
    gam = Params.from_vector(out.x, shape).gamma_full(shape)
    if np.any(np.diff(gam) <= 0):
        warns.append(f"fitted thresholds not increasing: {np.round(gam, 4).tolist()}")
    if not out.converged:
        warns.append(f"did not converge (stop: {out.stop_reason}, |score|={np.max(np.abs(out.grad[free])):.3g})")
    return lik, active, free, warns, out, vcov


def fit(dataset: PanelDataset, cfg: FitConfig | None = None) -> FitResult:
    """Maximise the composite conditional likelihood by damped Newton-Raphson."""
    cfg = cfg or FitConfig()
    shape = dataset.shape
    names = shape.param_names(dataset.covariate_names)
    lik = CompositeLikelihood(dataset, cfg.bandwidth)
    pw = lik.pair_weights()  # before dropping thin pairs
    counts = {f"{j},{l}": float(pw[p]) for p, (j, l) in enumerate(lik.cells.pairs)}
    lik, active, free, warns, out, vcov = _fit_likelihood(lik, cfg, names)
    for w in warns:
        logger.warning(w)
    return FitResult(
        "ccmle", names, out.x, vcov, out.value, out.iterations, out.converged, out.stop_reason, len(dataset),
        shape, counts, warns, free, cfg.echo(), out.trace,
    )


def sandwich_vcov(dataset: PanelDataset, theta_hat: Params, cfg: FitConfig | None = None) -> np.ndarray:
    """``H^-1 Omega H^-1 / n`` with ``Omega`` the mean outer product of per-individual composite scores."""
    cfg = cfg or FitConfig()
    names = dataset.shape.param_names(dataset.covariate_names)
    lik, _, free, _ = _identification(CompositeLikelihood(dataset, cfg.bandwidth), cfg, names)
    return _sandwich(lik, theta_hat.to_vector(), free, names)


def information_diagnostic(dataset: PanelDataset, theta: Params, cfg: FitConfig | None = None) -> float:
    """``||H + sum_jl Omega_jl|| / ||H||`` (Frobenius); near 0 under correct specification."""
    cfg = cfg or FitConfig()
    lik = CompositeLikelihood(dataset, cfg.bandwidth)
    H = lik.hessian(theta)
    S = sum(lik.pair_score_variances(theta).values())
    return float(np.linalg.norm(H + S) / np.linalg.norm(H))


@dataclass
class BootstrapResult:
    param_names: list
    se: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    estimates: np.ndarray  # (B_kept, p)
    n_requested: int
    n_dropped: int
    seed: int

    def table(self) -> str:
        lines = [f"{'parameter':<16}{'boot_se':>12}{'p2.5':>12}{'p97.5':>12}"]
        for row in zip(self.param_names, self.se, self.ci_low, self.ci_high):
            lines.append(f"{row[0]:<16}{row[1]:>12.5f}{row[2]:>12.5f}{row[3]:>12.5f}")
        lines.append(f"replicates kept {self.n_requested - self.n_dropped}/{self.n_requested}")
        return "\n".join(lines)


def _replicate(lik, cfg, names, seed, r):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(r,)))
    counts = np.bincount(rng.integers(0, lik.n, lik.n), minlength=lik.n)
    try:
        *_, out, _ = _fit_likelihood(lik.reweighted(counts), cfg, names, want_vcov=False)
    except EstimationError:
        return None
    return out.x if out.converged else None


def bootstrap(dataset: PanelDataset, cfg: FitConfig | None = None, B: int = 500, seed: int = 0,
              n_jobs: int = 1) -> BootstrapResult:
    """Individual-level (cluster) nonparametric bootstrap of the composite estimator.

    Replicate ``r`` draws its resample from the substream ``(seed, r)``, so the
    output does not depend on ``n_jobs``.
    """
    if B < 2:
        raise InvalidParameterError("bootstrap needs B >= 2")
    cfg = cfg or FitConfig()
    names = dataset.shape.param_names(dataset.covariate_names)
    lik = CompositeLikelihood(dataset, cfg.bandwidth)
    if n_jobs == 1:
        reps = [_replicate(lik, cfg, names, seed, r) for r in range(B)]
    else:
        from joblib import Parallel, delayed

        reps = Parallel(n_jobs=n_jobs, prefer="threads")(delayed(_replicate)(lik, cfg, names, seed, r) for r in range(B))
    kept = [x for x in reps if x is not None]
    dropped = B - len(kept)
    if dropped > 0.2 * B:
        raise UnreliableBootstrapError(f"{dropped} of {B} bootstrap replicates failed or did not converge")
    est = np.array(kept).reshape(len(kept), len(names))
    if len(kept) < 2:
        raise UnreliableBootstrapError("fewer than two usable bootstrap replicates")
    se = est.std(axis=0, ddof=1)
    lo, hi = np.percentile(est, [2.5, 97.5], axis=0)
    return BootstrapResult(names, se, lo, hi, est, B, dropped, seed)


# --------------------------------------------------------------------------
# pooled ordered logit (no fixed effects)

class PooledOrderedLogitLikelihood:
    """Pooled ordered logit over periods 1..3, optionally with the lag regressor.

    Layout: ``(beta_1..beta_K, [rho], gamma_2..gamma_J)``; every threshold is free.
    """

    def __init__(self, dataset: PanelDataset, with_lag: bool = True):
        shape = dataset.shape
        self.shape, self.with_lag, self.n = shape, with_lag, len(dataset)
        Y = dataset.Y
        y = Y[:, 1:].reshape(-1)
        cols = [dataset.X.reshape(-1, shape.K)]
        if with_lag:
            cols.append((Y[:, :3] >= shape.k).reshape(-1, 1).astype(float))
        self.Z = np.hstack(cols)
        self.y = y
        self.owner = np.repeat(np.arange(self.n), 3)
        self.nz = self.Z.shape[1]
        self.p = self.nz + shape.J - 1
        J, N = shape.J, y.size
        # threshold selectors: u_a = eta - gamma_y (y >= 2), u_b = eta - gamma_{y+1} (y <= J-1)
        self.has_a = y >= 2
        self.has_b = y <= J - 1
        self.Ea = np.zeros((N, J - 1))
        self.Eb = np.zeros((N, J - 1))
        rows = np.arange(N)
        self.Ea[rows[self.has_a], y[self.has_a] - 2] = 1.0
        self.Eb[rows[self.has_b], y[self.has_b] - 1] = 1.0
        self.Ca = np.hstack([self.Z, -self.Ea]) * self.has_a[:, None]
        self.Cb = np.hstack([self.Z, -self.Eb]) * self.has_b[:, None]

    def names(self, covariate_names):
        names = [f"beta_{c}" for c in covariate_names]
        if self.with_lag:
            names.append("rho")
        return names + [f"gamma_{j}" for j in range(2, self.shape.J + 1)]

    def _parts(self, theta):
        theta = np.asarray(theta, dtype=float)
        eta = self.Z @ theta[: self.nz]
        gam = theta[self.nz :]
        ua = eta - self.Ea @ gam
        ub = eta - self.Eb @ gam
        la, lb = expit(ua), expit(ub)
        fa = np.where(self.has_a, la * (1 - la), 0.0)
        fb = np.where(self.has_b, lb * (1 - lb), 0.0)
        mid = self.has_a & self.has_b
        gap = ua - ub  # gamma_{y+1} - gamma_y; crossed thresholds give an empty cell
        log_gap = np.full(gap.shape, -np.inf)
        ok = gap > 0
        log_gap[ok] = np.log(-np.expm1(-gap[ok]))
        logp = np.where(
            mid,
            log_logistic(ua) + log_logistic(-ub) + log_gap,
            np.where(self.has_a, log_logistic(ua), log_logistic(-ub)),
        )
        p = np.exp(logp)
        return logp, p, la, lb, fa, fb

    def evaluate(self, theta):
        logp, p, la, lb, fa, fb = self._parts(theta)
        if not np.all(np.isfinite(logp)):
            return -np.inf, np.full(self.p, np.nan), np.full((self.p, self.p), np.nan)
        val = float(logp.sum() / self.n)
        ga, gb = fa / p, fb / p
        s = self.Ca * ga[:, None] - self.Cb * gb[:, None]
        wa = ga * (1 - 2 * la)
        wb = gb * (1 - 2 * lb)
        H = (self.Ca.T * wa) @ self.Ca - (self.Cb.T * wb) @ self.Cb - s.T @ s
        H = 0.5 * (H + H.T) / self.n
        return val, s.sum(axis=0) / self.n, H

    def individual_scores(self, theta):
        logp, p, la, lb, fa, fb = self._parts(theta)
        s = self.Ca * (fa / p)[:, None] - self.Cb * (fb / p)[:, None]
        out = np.zeros((self.n, self.p))
        np.add.at(out, self.owner, s)
        return out


def fit_pooled(dataset: PanelDataset, with_lag: bool = True, cfg: FitConfig | None = None) -> FitResult:
    """Pooled ordered logit ML (alpha_i = 0) with cluster-robust sandwich variance."""
    cfg = cfg or FitConfig()
    shape = dataset.shape
    if len(dataset) == 0:
        raise NoInformationError("empty dataset")
    lik = PooledOrderedLogitLikelihood(dataset, with_lag)
    names = lik.names(dataset.covariate_names)
    freq = np.bincount(lik.y, minlength=shape.J + 1)[1:] / lik.y.size
    empty = [j + 1 for j in range(shape.J) if freq[j] == 0]
    if empty:
        raise NoInformationError(f"categories {empty} never observed in periods 1..3; thresholds not identified")
    x0 = np.zeros(lik.p)
    x0[lik.nz :] = logit(np.cumsum(freq)[:-1])
    out = newton_maximize(
        lik.evaluate, x0, tol_grad=cfg.tol_grad, tol_step=cfg.tol_step, max_iter=cfg.max_iter,
        max_halvings=cfg.max_halvings, divergence_bound=cfg.divergence_bound, names=names,
    )
    H = out.hess
    if not _well_conditioned(-H):
        raise SingularHessianError("pooled Hessian singular at the estimate", _weak_slots(-H, names))
    Hinv = np.linalg.inv(H)
    s = lik.individual_scores(out.x)
    V = Hinv @ (s.T @ s / lik.n) @ Hinv / lik.n
    warns = []
    gam = out.x[lik.nz :]
    if np.any(np.diff(gam) <= 0):
        warns.append(f"fitted thresholds not increasing: {np.round(gam, 4).tolist()}")
    if not out.converged:
        warns.append(f"did not converge (stop: {out.stop_reason})")
    return FitResult(
        "pooled-lag" if with_lag else "pooled", names, out.x, 0.5 * (V + V.T), out.value, out.iterations,
        out.converged, out.stop_reason, len(dataset), shape, {}, warns, np.ones(lik.p, bool), cfg.echo(), out.trace,
    )


# --------------------------------------------------------------------------

def interpret(theta: Params, shape: ModelShape, covariate_names=None) -> dict:
    """Ratios that put the persistence parameter on an interpretable scale.

    ``-rho/gamma_j`` for ``j < k`` and ``rho/gamma_l`` for ``l > k`` read as linear
    AR(1)-type coefficients; ``rho/beta_m`` compares persistence with each
    covariate effect.  Undefined ratios (zero denominator) map to ``None``.
    """
    theta.check_shape(shape)
    names = covariate_names or [f"x{m + 1}" for m in range(shape.K)]
    rho = theta.rho
    out = {}
    for j, g in zip(shape.free_thresholds, theta.gamma_free):
        key = f"-rho/gamma_{j}" if j < shape.k else f"rho/gamma_{j}"
        out[key] = None if g == 0 else (-rho / g if j < shape.k else rho / g)
    for name, b in zip(names, theta.beta):
        out[f"rho/beta_{name}"] = None if b == 0 else rho / b
    return out
