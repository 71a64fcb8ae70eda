"""Active sets, degrees of freedom, null-space structure and lambda paths."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, lsqr

from .exceptions import DimensionMismatch, InvalidParameter, TooLarge
from .graph import connected_components
from .operators import DENSE_LIMIT, RANK_RTOL, DifferenceOperator, pseudoinverse
from .solvers import (
    SolverOptions,
    active_threshold,
    gtf_admm,
    gtf_projected_newton,
    solve,
)

__all__ = [
    "active_set",
    "estimate_df",
    "nullspace_residual",
    "lambda_crit",
    "lambda_path",
    "PathEntry",
    "PathResult",
    "mse",
    "noise_snr",
    "denoised_snr",
    "stein_df_monte_carlo",
    "SteinResult",
]


def active_set(fit):
    """Sorted row indices of ``Delta beta`` above the active-set threshold."""
    Db = fit.operator.apply(fit.beta)
    return np.flatnonzero(np.abs(Db) > active_threshold(Db))


def estimate_df(fit, g=None):
    """Unbiased degrees-of-freedom estimate from the active set.

    Odd ``k``: ``max(|A|, 1)``. Even ``k``: number of connected components
    of the graph with the active edges removed. On a disconnected graph the
    odd-``k`` rule is applied per component and summed; the even-``k`` count
    is already additive.
    """
    g = fit.graph if g is None else g
    A = active_set(fit)
    if fit.k % 2 == 0:
        return connected_components(g, A).count
    comp = connected_components(g)
    per = np.bincount(comp.labels[A], minlength=comp.count)
    return int(np.maximum(per, 1).sum())


def _pinv_laplacian(g):
    if g.n > DENSE_LIMIT:
        raise TooLarge(f"dense Laplacian pseudoinverse refused for n={g.n}")
    return pseudoinverse(g.laplacian, limit=g.n)


def nullspace_residual(fit, g=None):
    """Relative distance of ``beta`` from the span predicted by its active set.

    Even ``k``: span of component indicators together with
    ``(L^+)^(k/2) 1_C`` for each component ``C`` of ``G`` minus the active
    edges. Odd ``k``: component indicators together with
    ``(L^+)^((k+1)/2) e_a`` for active nodes ``a``.
    """
    g = fit.graph if g is None else g
    beta = np.asarray(fit.beta, dtype=float)
    nb = np.linalg.norm(beta)
    if nb == 0:
        return 0.0
    P = _pinv_laplacian(g)
    A = active_set(fit)
    base = connected_components(g)
    cols = [(base.labels == c).astype(float) for c in range(base.count)]
    if fit.k % 2 == 0:
        q = fit.k // 2
        parts = connected_components(g, A)
        S = np.column_stack([(parts.labels == c).astype(float) for c in range(parts.count)])
    else:
        q = (fit.k + 1) // 2
        S = np.zeros((g.n, len(A)))
        S[A, np.arange(len(A))] = 1.0
    for _ in range(q):
        S = P @ S
    B = np.column_stack(cols + [S]) if S.size else np.column_stack(cols)
    U, s, _ = np.linalg.svd(B, full_matrices=False)
    U = U[:, s > RANK_RTOL * s[0]]
    resid = beta - U @ (U.T @ beta)
    return float(np.linalg.norm(resid) / nb)


def _null_projection(y, g):
    comp = connected_components(g)
    means = np.bincount(comp.labels, weights=y) / np.bincount(comp.labels)
    return means[comp.labels]


def lambda_crit(y, g, k, method="auto"):
    """Lambda at and above which the fit is the component-wise mean.

    ``||(Delta^T)^+ (y - P y)||_inf`` with ``P`` the projection onto
    component-wise constants. This uses the minimum-norm dual, so it is the
    exact threshold when the dual is unique (e.g. k = 0 on a forest) and an
    upper bound on it otherwise. Dense pseudoinverse for ``n <= 500``, LSQR
    otherwise (or when ``method="iterative"``).
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (g.n,):
        raise DimensionMismatch(f"signal has shape {y.shape}, expected ({g.n},)")
    op = DifferenceOperator(g, k)
    r = y - _null_projection(y, g)
    if op.rows == 0:
        return 0.0
    if method == "auto":
        method = "dense" if g.n <= DENSE_LIMIT else "iterative"
    if method == "dense":
        M = op.tosparse()
        v = pseudoinverse(M.T, limit=max(M.shape)) @ r
    elif method == "iterative":
        lin = op.as_linear_operator()
        At = LinearOperator((g.n, op.rows), matvec=lin.rmatvec, rmatvec=lin.matvec, dtype=float)
        v = lsqr(At, r, atol=1e-14, btol=1e-14, iter_lim=50 * g.n)[0]
    else:
        raise InvalidParameter(f"unknown method {method!r}")
    return float(np.abs(v).max())


# -- metrics ------------------------------------------------------------------


def _pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} differ")
    return a, b


def mse(beta, beta0):
    beta, beta0 = _pair(beta, beta0)
    return float(np.sum((beta - beta0) ** 2) / beta.size)


def noise_snr(x, sigma):
    """Input negative SnR in dB: ``10 log10(n sigma^2 / ||x||^2)``."""
    x = np.asarray(x, dtype=float)
    if not sigma > 0:
        raise InvalidParameter("sigma must be positive")
    energy = float(x @ x)
    return math.inf if energy == 0 else 10.0 * math.log10(x.size * sigma**2 / energy)


def denoised_snr(beta, x):
    """Denoised negative SnR in dB: ``10 log10(MSE / ||x||^2)``.

    A perfect fit gives ``-inf``; an imperfect fit of a zero signal ``+inf``.
    """
    beta, x = _pair(beta, x)
    err = mse(beta, x)
    if err == 0:
        return -math.inf
    energy = float(x @ x)
    return math.inf if energy == 0 else 10.0 * math.log10(err / energy)


# -- lambda paths -------------------------------------------------------------


@dataclass
class PathEntry:
    lam: float
    df: int
    objective: float
    mse: float | None = None
    snr: float | None = None
    converged: bool = True
    method: str = ""
    fit: object = field(default=None, repr=False)


@dataclass
class PathResult:
    entries: list

    @property
    def lambdas(self):
        return np.array([e.lam for e in self.entries])

    @property
    def dfs(self):
        return np.array([e.df for e in self.entries], dtype=int)

    def __len__(self):
        return len(self.entries)

    def to_csv(self, path=None):
        """Columns ``lambda,df,objective,mse,snr``; floats in ``repr`` form."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["lambda", "df", "objective", "mse", "snr"])
        for e in self.entries:
            w.writerow(
                [
                    repr(float(e.lam)),
                    e.df,
                    repr(float(e.objective)),
                    "" if e.mse is None else repr(float(e.mse)),
                    "" if e.snr is None else repr(float(e.snr)),
                ]
            )
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def auto_grid(y, g, k, count=50, decades=4.0):
    top = lambda_crit(y, g, k)
    if top == 0:
        top = 1.0
    return np.geomspace(top, top * 10.0**-decades, count)


def lambda_path(y, g, k, grid="auto", opts=None, truth=None, method="auto", keep_fits=False):
    """Warm-started fits over a strictly decreasing lambda grid."""
    y = np.asarray(y, dtype=float)
    if isinstance(grid, str):
        if grid != "auto":
            raise InvalidParameter(f"grid must be a sequence or 'auto', got {grid!r}")
        lams = auto_grid(y, g, k)
    else:
        lams = np.asarray(grid, dtype=float).ravel()
        if lams.size == 0 or np.any(lams < 0) or np.any(np.diff(lams) >= 0):
            raise InvalidParameter("lambda grid must be nonnegative and strictly decreasing")
    if truth is not None:
        truth = np.asarray(truth, dtype=float)
        _pair(truth, y)
    opts = opts or SolverOptions()
    if method == "auto":
        method = "maxflow" if k == 0 else "newton" if k == 1 else "admm"
    entries = []
    prev = None
    for lam in lams:
        lam = float(lam)
        if method == "admm" and prev is not None and lam > 0:
            fit = gtf_admm(y, g, k, lam, opts, _state=prev.diagnostics.get("state"))
        elif method == "newton" and prev is not None:
            fit = gtf_projected_newton(y, g, k, lam, opts, v0=prev.dual)
        else:
            fit = solve(y, g, k, lam, method=method, opts=opts)
        prev = fit
        e = PathEntry(lam, estimate_df(fit, g), fit.objective, converged=bool(fit.converged),
                      method=fit.method)
        if truth is not None:
            e.mse = mse(fit.beta, truth)
            e.snr = denoised_snr(fit.beta, truth)
        if keep_fits:
            e.fit = fit
        entries.append(e)
    return PathResult(entries)


# -- Monte Carlo check of the df estimate -------------------------------------


@dataclass
class SteinResult:
    stein_df: float
    stein_se: float
    df_mean: float
    df_se: float
    diff_mean: float
    diff_se: float
    reps: int

    def within(self, n_se=3.0):
        return abs(self.diff_mean) <= n_se * self.diff_se


def stein_df_monte_carlo(g, k, lam, beta0, sigma, reps=2000, seed=0, method="auto", opts=None):
    """Covariance-based df over ``reps`` noise draws, paired with the active-set estimate.

    Draw ``r`` uses the generator seeded by ``(seed, r)``. Per draw the
    covariance term is ``(beta_hat - beta0) . eps / sigma^2``; its mean over
    draws is the Stein estimate of df.
    """
    if reps < 100:
        raise InvalidParameter("reps must be >= 100")
    if not sigma > 0:
        raise InvalidParameter("sigma must be positive")
    beta0 = np.asarray(beta0, dtype=float)
    cov = np.empty(reps)
    dfs = np.empty(reps)
    for r in range(reps):
        eps = sigma * np.random.default_rng([seed, r]).standard_normal(g.n)
        fit = solve(beta0 + eps, g, k, lam, method=method, opts=opts)
        cov[r] = float((fit.beta - beta0) @ eps) / sigma**2
        dfs[r] = estimate_df(fit, g)
    diff = dfs - cov
    root = math.sqrt(reps)
    return SteinResult(
        float(cov.mean()),
        float(cov.std(ddof=1) / root),
        float(dfs.mean()),
        float(dfs.std(ddof=1) / root),
        float(diff.mean()),
        float(diff.std(ddof=1) / root),
        reps,
    )
