"""Graph trend filtering estimators.

All solvers minimize

    1/2 ||y - beta||^2 + lam * ||Delta beta||_1

for the graph difference operator ``Delta`` of order ``k + 1`` and return a
:class:`GtfFit`. The ADMM solver splits ``z = L^q beta`` and alternates a
PCG solve, a proximal step (graph TV prox for even ``k``, soft-thresholding
for odd ``k``) and a scaled dual update. The projected Newton solver works
on the box-constrained dual.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .exceptions import (
    DimensionMismatch,
    IllConditioned,
    InvalidParameter,
    MaxIterationsExceeded,
)
from .flow import tv_denoise
from .linalg import laplacian_power_apply, laplacian_power_colnorms, pcg
from .operators import DifferenceOperator

__all__ = [
    "SolverOptions",
    "GtfFit",
    "gtf_objective",
    "active_threshold",
    "soft_threshold",
    "gtf_admm",
    "gtf_projected_newton",
    "laplacian_smooth",
    "sparse_gtf",
    "solve",
    "kkt_residuals",
    "METHOD_NAMES",
]

METHOD_NAMES = {
    "maxflow": "maxflow",
    "newton": "projected-newton",
    "admm-even": "admm+maxflow",
    "admm-odd": "admm+soft-threshold",
}


@dataclass(frozen=True)
class SolverOptions:
    """Tuning knobs shared by the iterative solvers.

    ``rho=None`` means ``max(lam, 1e-3)``. The ADMM stopping threshold on
    both residual norms is ``tolerance * sqrt(n) * max(1, ||y||_inf)``.
    ``seed`` randomizes the ADMM starting point; ``None`` starts from zero
    duals.
    """

    rho: float | None = None
    max_iterations: int = 5000
    tolerance: float = 1e-8
    cg_tolerance: float = 1e-10
    adaptive_rho: bool = True
    seed: int | None = None
    polish: bool = True

    def __post_init__(self):
        if self.rho is not None and not self.rho > 0:
            raise InvalidParameter("rho must be positive")
        if not self.tolerance > 0 or not self.cg_tolerance > 0:
            raise InvalidParameter("tolerances must be positive")
        if self.max_iterations < 1:
            raise InvalidParameter("max_iterations must be >= 1")


@dataclass
class GtfFit:
    beta: np.ndarray
    lam: float
    k: int
    y: np.ndarray = field(repr=False)
    graph: object = field(repr=False)
    dual: np.ndarray | None = field(default=None, repr=False)
    objective: float = float("nan")
    iterations: int = 0
    converged: bool = False
    residuals: list = field(default_factory=list, repr=False)
    method: str = ""
    lam2: float = 0.0
    diagnostics: dict = field(default_factory=dict, repr=False)

    @property
    def operator(self):
        return DifferenceOperator(self.graph, self.k)

    def recompute_objective(self):
        return gtf_objective(self.y, self.operator, self.lam, self.beta, self.lam2)


def _check_signal(y, g):
    y = np.asarray(y, dtype=float)
    if y.shape != (g.n,):
        raise DimensionMismatch(f"signal has shape {y.shape}, expected ({g.n},)")
    if not np.all(np.isfinite(y)):
        raise InvalidParameter("signal contains non-finite values")
    return y


def _check_lam(lam, name="lam"):
    lam = float(lam)
    if not lam >= 0:
        raise InvalidParameter(f"{name} must be >= 0, got {lam}")
    return lam


def gtf_objective(y, op, lam, beta, lam2=0.0):
    val = 0.5 * float(np.sum((y - beta) ** 2)) + lam * float(np.abs(op.apply(beta)).sum())
    if lam2:
        val += lam2 * float(np.abs(beta).sum())
    return val


def active_threshold(delta_beta):
    return 1e-8 * max(1.0, float(np.abs(delta_beta).max(initial=0.0)))


def soft_threshold(x, t):
    if not t >= 0:
        raise InvalidParameter(f"threshold must be >= 0, got {t}")
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def kkt_residuals(fit):
    """Dual feasibility, stationarity and sign-alignment gaps of a fit.

    Returns a dict with ``dual_excess`` (``max|v| / lam - 1``),
    ``stationarity`` (``||beta - (y - Delta.T v)||_inf``) and
    ``sign_violation`` (largest ``|v_l - lam * sign((Delta beta)_l)|`` over
    active rows). Only meaningful for plain GTF fits with a dual.
    """
    if fit.dual is None:
        raise InvalidParameter("fit carries no dual vector")
    op = fit.operator
    v = fit.dual
    Db = op.apply(fit.beta)
    active = np.abs(Db) > active_threshold(Db)
    lam = fit.lam
    excess = float(np.abs(v).max(initial=0.0) / lam - 1.0) if lam > 0 else float(np.abs(v).max(initial=0.0))
    stat = float(np.abs(fit.beta - (fit.y - op.apply_transpose(v))).max())
    sign = float(np.abs(v[active] - lam * np.sign(Db[active])).max(initial=0.0))
    return {"dual_excess": excess, "stationarity": stat, "sign_violation": sign}


# -- ADMM ---------------------------------------------------------------------


@dataclass
class _AdmmState:
    beta: np.ndarray
    z: np.ndarray
    u: np.ndarray
    rho: float
    w: np.ndarray | None = None
    u2: np.ndarray | None = None


def _admm(y, op, lam, opts, loss_weights=None, lam2=0.0, state=None):
    """Scaled-dual ADMM for ``1/2 sum a_i (y_i - b_i)^2 + lam ||Delta b||_1 + lam2 ||b||_1``.

    Returns ``(state, dual, history, converged, iterations, support)`` where
    ``support`` is the exact sparsity pattern of ``S z`` from the last prox.
    """
    g = op.graph
    n = g.n
    q = op.q
    even = op.k % 2 == 0
    L = g.laplacian
    a = np.ones(n) if loss_weights is None else np.asarray(loss_weights, dtype=float)
    sparse = lam2 > 0
    colsq = laplacian_power_colnorms(L, q)

    def Lq(x):
        return laplacian_power_apply(L, x, q)

    if state is None:
        rho = opts.rho if opts.rho is not None else max(lam, 1e-3)
        beta = y.copy()
        z = Lq(beta)
        u = np.zeros(n)
        w = beta.copy() if sparse else None
        u2 = np.zeros(n) if sparse else None
        if opts.seed is not None:
            rng = np.random.default_rng(opts.seed)
            scale = max(1.0, float(np.abs(y).max()))
            z = z + scale * rng.standard_normal(n)
            u = scale * rng.standard_normal(n) / rho
        state = _AdmmState(beta, z, u, rho, w, u2)
    else:
        state = replace(state)
    beta, z, u, rho, w, u2 = state.beta, state.z, state.u, state.rho, state.w, state.u2

    eps = opts.tolerance * np.sqrt(n) * max(1.0, float(np.abs(y).max(initial=0.0)))
    # the inner solve must not put a floor under the primal residual
    lnorm = 2.0 * float(L.diagonal().max(initial=0.0)) if q else 1.0
    cg_target = 1e-2 * eps / max(1.0, lnorm) ** q
    rho_lo, rho_hi = rho * 1e-6, rho * 1e6
    history = []
    converged = False
    v = np.zeros(op.rows)
    Sz = None
    it = 0
    for it in range(1, opts.max_iterations + 1):
        rhs = a * y + rho * Lq(z + u)
        diag = a + rho * colsq
        if sparse:
            rhs = rhs + rho * (w + u2)
            diag = diag + rho
        if q == 0:
            beta = rhs / diag
        else:
            extra = rho if sparse else 0.0

            def mv(x, rho=rho, extra=extra):
                return a * x + rho * laplacian_power_apply(L, x, 2 * q) + extra * x

            rtol = min(opts.cg_tolerance, max(cg_target / max(np.linalg.norm(rhs), 1e-300), 1e-15))
            beta = pcg(mv, rhs, diag=diag, x0=beta, rtol=rtol).x
        Lb = Lq(beta)
        point = Lb - u
        if even:
            res = tv_denoise(g, point, lam / rho, return_dual=True)
            z_new = res.x
            v = rho * res.dual
        else:
            z_new = soft_threshold(point, lam / rho)
            v = np.clip(rho * (point - z_new), -lam, lam)
        r_vec = z_new - Lb
        s_vec = rho * Lq(z_new - z)
        u = u + r_vec
        rn2 = float(r_vec @ r_vec)
        sn2 = float(s_vec @ s_vec)
        if sparse:
            w_new = soft_threshold(beta - u2, lam2 / rho)
            r2 = w_new - beta
            s2 = rho * (w_new - w)
            u2 = u2 + r2
            rn2 += float(r2 @ r2)
            sn2 += float(s2 @ s2)
            w = w_new
        z = z_new
        rn, sn = np.sqrt(rn2), np.sqrt(sn2)
        history.append((rn, sn, rho))
        if rn <= eps and sn <= eps:
            converged = True
            break
        if opts.adaptive_rho and it % 10 == 0:
            if rn > 10 * sn and rho < rho_hi:
                rho *= 2.0
                u = u / 2.0
                if sparse:
                    u2 = u2 / 2.0
            elif sn > 10 * rn and rho > rho_lo:
                rho /= 2.0
                u = u * 2.0
                if sparse:
                    u2 = u2 * 2.0
    Sz = g.incidence @ z if even else z
    support = np.abs(Sz) > 1e-10 * max(1.0, float(np.abs(Sz).max(initial=0.0)))
    signs = np.sign(Sz)
    state = _AdmmState(beta, z, u, rho, w, u2)
    return state, v, history, converged, it, (support, signs)


def _polish(y, op, lam, support, signs, dense_limit=3_000_000):
    """Exact solution on the face ``{Delta_{-A} beta = 0}`` with fixed signs on ``A``.

    Returns ``(beta, dual)`` where ``dual`` certifies stationarity exactly;
    ``None`` if the least-squares problem is too large for the dense path.
    """
    A = np.flatnonzero(support)
    N = np.flatnonzero(~support)
    full = np.zeros(op.rows)
    full[A] = lam * signs[A]
    target = y - op.apply_transpose(full)
    if N.size == 0:
        return target, full
    if N.size * op.graph.n > dense_limit:
        return None
    M = op.tosparse()[N].toarray()
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    keep = s > 1e-10 * s[0]
    U, s, Vt = U[:, keep], s[keep], Vt[keep]
    coef = Vt @ target
    beta = target - Vt.T @ coef
    xi = U @ (coef / s)
    dual = full.copy()
    dual[N] = xi
    return beta, dual


def _try_polish(fit, y, op, lam, support, signs):
    """Replace ``fit.beta`` by the face solution when signs agree and the objective does not rise."""
    out = _polish(y, op, lam, support, signs)
    if out is None:
        return
    pbeta, pdual = out
    Db = op.apply(pbeta)
    consistent = np.all(signs[support] * Db[support] >= -1e-12 * max(1.0, np.abs(Db).max(initial=0.0)))
    pobj = gtf_objective(y, op, lam, pbeta)
    if consistent and pobj <= fit.objective + 1e-12 * (1.0 + abs(fit.objective)):
        fit.beta = pbeta
        fit.objective = pobj
        fit.diagnostics["polished"] = True
        if np.abs(pdual).max(initial=0.0) <= lam * (1 + 1e-9):
            fit.dual = pdual
            fit.diagnostics["exact_dual"] = True


def _finish_admm_fit(y, g, op, lam, opts, state, v, history, converged, iters, pattern, method):
    beta = state.beta
    fit = GtfFit(
        beta=beta,
        lam=lam,
        k=op.k,
        y=y,
        graph=g,
        dual=v,
        iterations=iters,
        converged=converged,
        residuals=history,
        method=method,
        diagnostics={"rho": state.rho, "polished": False},
    )
    fit.objective = gtf_objective(y, op, lam, beta)
    if opts.polish and lam > 0:
        _try_polish(fit, y, op, lam, *pattern)
    if not converged:
        warnings.warn(
            f"ADMM stopped after {iters} iterations without meeting tolerance",
            MaxIterationsExceeded,
            stacklevel=3,
        )
    return fit


def gtf_admm(y, g, k, lam, opts=None, _state=None):
    """Graph trend filtering by ADMM (works for every order ``k``)."""
    opts = opts or SolverOptions()
    y = _check_signal(y, g)
    lam = _check_lam(lam)
    op = DifferenceOperator(g, k)
    method = METHOD_NAMES["admm-even" if op.k % 2 == 0 else "admm-odd"]
    if lam == 0:
        return GtfFit(y.copy(), 0.0, op.k, y, g, np.zeros(op.rows), 0.0, 0, True, [], method)
    state, v, hist, conv, it, pattern = _admm(y, op, lam, opts, state=_state)
    fit = _finish_admm_fit(y, g, op, lam, opts, state, v, hist, conv, it, pattern, method)
    fit.diagnostics["state"] = state
    return fit


# -- projected Newton on the dual ---------------------------------------------


def gtf_projected_newton(y, g, k, lam, opts=None, v0=None):
    """Graph trend filtering through its box-constrained dual.

    Minimizes ``1/2||y - Delta.T v||^2`` subject to ``|v| <= lam`` by a
    projected Newton method: reduced-Hessian steps on the free coordinates
    (solved by Jacobi PCG) with Armijo backtracking along the projection
    arc. Stops on a relative duality gap below ``opts.tolerance``.
    """
    opts = opts or SolverOptions()
    y = _check_signal(y, g)
    lam = _check_lam(lam)
    op = DifferenceOperator(g, k)
    method = METHOD_NAMES["newton"]
    r = op.rows
    if lam == 0 or r == 0:
        fit = GtfFit(y.copy(), lam, op.k, y, g, np.zeros(r), 0.0, 0, True, [], method)
        fit.objective = fit.recompute_objective()
        return fit
    M = op.tosparse()
    rowsq = np.asarray(M.multiply(M).sum(axis=1)).ravel()
    step_pg = 1.0 / max(float(rowsq.max()) * 2.0, 1e-300)
    v = np.zeros(r) if v0 is None else np.clip(np.asarray(v0, dtype=float), -lam, lam)
    bound_eps = 1e-10 * max(1.0, lam)
    sigma = 1e-4
    history = []
    ill = False
    converged = False
    yy = float(y @ y)
    it = 0
    for it in range(1, opts.max_iterations + 1):
        beta = y - M.T @ v
        Db = M @ beta
        grad = -Db
        primal = 0.5 * float(np.sum((y - beta) ** 2)) + lam * float(np.abs(Db).sum())
        dual_val = 0.5 * yy - 0.5 * float(beta @ beta)
        gap = primal - dual_val
        history.append(gap)
        if gap <= opts.tolerance * (1.0 + abs(primal)):
            converged = True
            break
        blocked = ((v >= lam - bound_eps) & (grad < 0)) | ((v <= -lam + bound_eps) & (grad > 0))
        F = np.flatnonzero(~blocked)
        d = np.zeros(r)
        if F.size:
            MF = M[F]
            MFt = MF.T.tocsr()
            cg = pcg(
                lambda x: MF @ (MFt @ x),
                Db[F],
                diag=rowsq[F],
                rtol=opts.cg_tolerance,
                max_iter=max(20 * F.size, 200),
            )
            if not cg.converged:
                ill = True
            d[F] = cg.x
        fv = 0.5 * float(beta @ beta)
        t = 1.0
        accepted = False
        while t >= 1e-10:
            v_new = np.clip(v + t * d, -lam, lam)
            b_new = y - M.T @ v_new
            if 0.5 * float(b_new @ b_new) <= fv + sigma * float(grad @ (v_new - v)):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            v_new = np.clip(v - step_pg * grad, -lam, lam)
        if np.array_equal(v_new, v):
            break
        v = v_new
    beta = y - M.T @ v
    fit = GtfFit(
        beta=beta,
        lam=lam,
        k=op.k,
        y=y,
        graph=g,
        dual=v,
        iterations=it,
        converged=converged,
        residuals=history,
        method=method,
        diagnostics={"ill_conditioned": ill, "duality_gap": history[-1] if history else 0.0,
                     "polished": False},
    )
    fit.objective = fit.recompute_objective()
    if opts.polish:
        # rows with the dual at the box edge define the face
        at_bound = np.abs(v) >= lam - bound_eps
        _try_polish(fit, y, op, lam, at_bound, np.sign(v))
    # a met duality gap certifies the fit, so stagnation alone is not reported
    if ill and not converged:
        msg = "conjugate gradient stagnated on the reduced Hessian"
        if op.k >= 2:
            msg += "; projected Newton is only recommended for k <= 1"
        warnings.warn(
            msg,
            IllConditioned,
            stacklevel=2,
        )
    if not converged:
        warnings.warn(
            f"projected Newton stopped after {it} iterations (gap {history[-1]:.3g})",
            MaxIterationsExceeded,
            stacklevel=2,
        )
    return fit


# -- baselines and variants ---------------------------------------------------


def laplacian_smooth(y, g, k, lam, rtol=1e-12):
    """``(I + lam L^(k+1))^{-1} y`` by Jacobi PCG.

    The constant vector is an eigenvector with eigenvalue one, so the mean
    is carried over exactly and only the centred part is iterated on.
    """
    y = _check_signal(y, g)
    lam = _check_lam(lam)
    if lam == 0:
        return y.copy()
    L = g.laplacian
    p = int(k) + 1
    diag = 1.0 + lam * _diag_of_power(L, p)
    mean = y.mean()
    rhs = y - mean

    def mv(x):
        return x + lam * laplacian_power_apply(L, x, p)

    res = pcg(mv, rhs, diag=diag, rtol=rtol, max_iter=max(50 * g.n, 500))
    return res.x + mean


def _diag_of_power(L, p):
    """Diagonal of ``L^p`` (``L`` symmetric)."""
    if p % 2 == 0:
        return laplacian_power_colnorms(L, p // 2)
    if p == 1:
        return L.diagonal()
    # diag(L^(2h+1)) = sum_j (L^h)_{ij} (L^(h+1))_{ij}
    h = (p - 1) // 2
    A = sp.identity(L.shape[0], format="csr")
    for _ in range(h):
        A = sp.csr_matrix(L @ A)
    B = sp.csr_matrix(L @ A)
    return np.asarray(A.multiply(B).sum(axis=1)).ravel()


def sparse_gtf(y, g, k, lam1, lam2, opts=None):
    """GTF with an extra ``lam2 * ||beta||_1`` term, by two-block ADMM.

    The stacked constraint is ``(z, w) = (L^q beta, beta)``. Entries of the
    result that the ``w`` block zeroes exactly (or that fall below 1e-10 in
    magnitude) are set to zero.
    """
    opts = opts or SolverOptions()
    y = _check_signal(y, g)
    lam1 = _check_lam(lam1, "lam1")
    lam2 = _check_lam(lam2, "lam2")
    if lam2 == 0:
        fit = gtf_admm(y, g, k, lam1, opts)
        return fit
    op = DifferenceOperator(g, k)
    method = "sparse-" + METHOD_NAMES["admm-even" if op.k % 2 == 0 else "admm-odd"]
    if lam1 == 0:
        beta = soft_threshold(y, lam2)
        fit = GtfFit(beta, 0.0, op.k, y, g, np.zeros(op.rows), 0.0, 0, True, [], method, lam2)
        fit.objective = fit.recompute_objective()
        return fit
    if opts.rho is None:
        opts = replace(opts, rho=max(lam1, lam2, 1e-3))
    state, v, hist, conv, it, _ = _admm(y, op, lam1, opts, lam2=lam2)
    beta = state.beta.copy()
    eps = opts.tolerance * np.sqrt(g.n) * max(1.0, float(np.abs(y).max()))
    beta[(np.abs(beta) <= 1e-10) | ((state.w == 0) & (np.abs(beta) <= 10 * eps))] = 0.0
    fit = GtfFit(beta, lam1, op.k, y, g, v, 0.0, it, conv, hist, method, lam2, {"rho": state.rho})
    fit.objective = fit.recompute_objective()
    if not conv:
        warnings.warn(
            f"sparse GTF ADMM stopped after {it} iterations", MaxIterationsExceeded, stacklevel=2
        )
    return fit


def solve(y, g, k, lam, method="auto", opts=None):
    """Dispatch to the solver recommended for order ``k``.

    ``auto`` uses the max-flow TV prox for ``k = 0``, projected Newton for
    ``k = 1`` and ADMM otherwise (TV prox subproblems for even ``k``,
    soft-thresholding for odd ``k``).
    """
    k = int(k)
    if method == "auto":
        method = "maxflow" if k == 0 else "newton" if k == 1 else "admm"
    if method == "maxflow":
        if k != 0:
            raise InvalidParameter("the direct max-flow solver only handles k = 0")
        y = _check_signal(y, g)
        lam = _check_lam(lam)
        res = tv_denoise(g, y, lam, return_dual=True)
        fit = GtfFit(res.x, lam, 0, y, g, res.dual, 0.0, 1, True, [], METHOD_NAMES["maxflow"])
        fit.diagnostics["cuts"] = res.cuts
        fit.objective = fit.recompute_objective()
        return fit
    if method == "newton":
        return gtf_projected_newton(y, g, k, lam, opts)
    if method == "admm":
        return gtf_admm(y, g, k, lam, opts)
    raise InvalidParameter(f"unknown method {method!r}; expected auto, admm, newton or maxflow")
