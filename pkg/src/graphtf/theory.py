"""Numerical checks of analytic facts about chain and grid operators.

Every check returns a :class:`TheoryReport`; :func:`run_suite` runs a named
selection and is what the ``theory`` CLI command calls.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidParameter, NotUnitNorm, TooLarge
from .flow import tv_denoise
from .graph import chain, erdos_renyi, grid2d
from .model_eval import lambda_crit, mse
from .operators import max_column_norm_pinv, univariate_difference_operator

__all__ = [
    "TheoryReport",
    "chain_neumann_eigenpairs",
    "chain_dirichlet_eigenvalues",
    "chain_dirichlet_eigenvectors",
    "grid_eigenpairs",
    "grid_incidence_eigenvectors",
    "incoherence_constant",
    "fused_lasso_atoms",
    "covering_check_fused_lasso",
    "atom_distance_check",
    "pinv_norm_scaling",
    "staircase_signal",
    "rate_sweep",
    "er_lambda_min_ratios",
    "run_suite",
    "CHECKS",
    "DEFAULT_CHECKS",
]

EQ_TOL = 1e-8
INEQ_SLACK = 1e-12


@dataclass
class TheoryReport:
    check: str
    params: dict
    computed: float
    bound: float
    passed: bool
    tolerance: float = 0.0
    kind: str = "inequality"
    extra: dict = field(default_factory=dict, repr=False)

    @classmethod
    def equality(cls, check, params, computed, analytic, tol=EQ_TOL, **extra):
        ok = abs(computed - analytic) <= tol
        return cls(check, params, float(computed), float(analytic), bool(ok), tol, "equality", extra)

    @classmethod
    def upper(cls, check, params, computed, bound, tol=INEQ_SLACK, **extra):
        ok = computed <= bound * (1 + tol)
        return cls(check, params, float(computed), float(bound), bool(ok), tol, "inequality", extra)

    def to_json(self):
        return json.dumps(
            {
                "check": self.check,
                "params": self.params,
                "computed": self.computed,
                "bound": self.bound,
                "pass": self.passed,
            },
            sort_keys=True,
        )


# -- eigenstructure -----------------------------------------------------------


def chain_neumann_eigenpairs(n):
    """Eigenvalues and orthonormal eigenvectors (columns) of the chain Laplacian."""
    n = int(n)
    if n < 2:
        raise InvalidParameter("n must be >= 2")
    i = np.arange(n)
    vals = 4.0 * np.sin(np.pi * i / (2 * n)) ** 2
    j = np.arange(1, n + 1) - 0.5
    U = np.sqrt(2.0 / n) * np.cos(np.pi * np.outer(j, i) / n)
    U[:, 0] = 1.0 / np.sqrt(n)
    return vals, U


def chain_dirichlet_eigenvalues(n):
    n = int(n)
    if n < 2:
        raise InvalidParameter("n must be >= 2")
    return 4.0 * np.sin(np.pi * np.arange(1, n) / (2 * n)) ** 2


def chain_dirichlet_eigenvectors(n):
    """Orthonormal eigenvectors (columns) of ``D D^T`` for the chain, ``(n-1) x (n-1)``."""
    n = int(n)
    if n < 2:
        raise InvalidParameter("n must be >= 2")
    idx = np.arange(1, n)
    return np.sqrt(2.0 / n) * np.sin(np.pi * np.outer(idx, idx) / n)


def grid_eigenpairs(rows, cols=None):
    """Kronecker-sum eigenpairs of the grid Laplacian (node ``r*cols + c``)."""
    cols = rows if cols is None else cols
    a, Ua = chain_neumann_eigenpairs(rows)
    b, Ub = chain_neumann_eigenpairs(cols)
    vals = (a[:, None] + b[None, :]).ravel()
    vecs = np.einsum("ri,cj->rcij", Ua, Ub).reshape(rows * cols, rows * cols)
    return vals, vecs


def grid_incidence_eigenvectors(rows, cols=None):
    """Unit eigenvectors of ``D D^T`` with nonzero eigenvalue, as ``D w / sqrt(xi)``.

    ``(xi, w)`` runs over the Kronecker eigenpairs of the grid Laplacian
    with ``xi > 0``. Returns ``(values, vectors)``.
    """
    cols = rows if cols is None else cols
    g = grid2d(rows, cols)
    vals, W = grid_eigenpairs(rows, cols)
    keep = vals > 1e-12
    V = (g.incidence @ W[:, keep]) / np.sqrt(vals[keep])
    return vals[keep], V


def incoherence_constant(vectors, n=None):
    """``sqrt(n)`` times the largest entry magnitude over unit-norm columns."""
    V = np.atleast_2d(np.asarray(vectors, dtype=float))
    if V.shape[0] == 1 and np.ndim(vectors) == 1:
        V = V.T
    norms = np.linalg.norm(V, axis=0)
    if np.any(np.abs(norms - 1.0) > 1e-8):
        raise NotUnitNorm(f"columns must have unit norm (worst {norms[np.argmax(np.abs(norms - 1))]:.6g})")
    n = V.shape[0] if n is None else int(n)
    return float(np.sqrt(n) * np.abs(V).max())


# -- covering of the fused lasso atoms ----------------------------------------


def fused_lasso_atoms(n):
    """Columns of the pseudoinverse of the first difference: centred step functions."""
    n = int(n)
    H = np.tril(np.ones((n, n - 1)), k=-1)
    return H - H.mean(axis=0)


def _side_centers(b, n, rounding):
    if b == 0:
        return []
    d = math.ceil((n - 1) / b) if rounding == "ceil" else max(1, n // b)
    return sorted({min(t * d, n - 1) for t in range(1, b + 1)})


def covering_check_fused_lasso(n, j, rounding="ceil"):
    """Covering radius of the symmetrized atoms by the explicit ``j``-ball construction.

    ``ceil(j/2)`` balls cover the atoms and ``floor(j/2)`` their negatives,
    each side centred at ``g_d, g_2d, ...`` (indices clipped to ``n - 1``)
    for ``b`` balls on that side. The step is ``d = ceil((n-1)/b)`` so the
    centres reach the last atom; ``rounding="floor"`` uses
    ``d = floor(n/b)`` instead, which leaves the tail uncovered once ``d``
    collapses to 1. A single ball (``j = 1``) is centred at the origin.
    """
    if rounding not in ("ceil", "floor"):
        raise InvalidParameter("rounding must be 'ceil' or 'floor'")
    n, j = int(n), int(j)
    if n < 2 or not 1 <= j <= 2 * (n - 1):
        raise InvalidParameter(f"need n >= 2 and 1 <= j <= {2 * (n - 1)}, got j={j}")
    G = fused_lasso_atoms(n)
    atoms = np.hstack([G, -G])
    if j == 1:
        C = np.zeros((n, 1))
    else:
        pos = _side_centers((j + 1) // 2, n, rounding)
        neg = _side_centers(j // 2, n, rounding)
        C = np.hstack([G[:, [i - 1 for i in pos]], -G[:, [i - 1 for i in neg]]])
    # direct differences: exact zeros when an atom is its own center
    dist = np.linalg.norm(atoms[:, :, None] - C[:, None, :], axis=0)
    radius = float(dist.min(axis=1).max())
    return TheoryReport.upper("covering", {"n": n, "j": j}, radius, math.sqrt(2.0 * n / j))


def atom_distance_check(n=50):
    """Largest ``||g_i - g_l|| / sqrt(i - l)`` over pairs ``i > l``; must not exceed one."""
    G = fused_lasso_atoms(n)
    worst = 0.0
    for l in range(n - 1):
        diff = G[:, l + 1 :] - G[:, [l]]
        gap = np.arange(1, n - 1 - l)
        worst = max(worst, float((np.linalg.norm(diff, axis=0) / np.sqrt(gap)).max(initial=0.0)))
    return TheoryReport.upper("atom-distance", {"n": int(n)}, worst, 1.0)


# -- pseudoinverse column norms -----------------------------------------------


def pinv_norm_scaling(k, n_list=(32, 64, 128, 256), tol=0.15):
    """Log-log slope of the largest pseudoinverse column norm of ``D^(k+1)`` against ``n``."""
    n_list = [int(n) for n in n_list]
    if len(n_list) < 4:
        raise InvalidParameter("need at least four sizes")
    if max(n_list) > 500:
        raise TooLarge("sizes above 500 are refused by the dense pseudoinverse")
    M = [max_column_norm_pinv(univariate_difference_operator(n, k)) for n in n_list]
    slope = float(np.polyfit(np.log(n_list), np.log(M), 1)[0])
    return TheoryReport.equality(
        "pinv-scaling", {"k": int(k), "n": n_list}, slope, k + 0.5, tol, norms=M
    )


# -- empirical fused lasso rate -----------------------------------------------


def staircase_signal(n, total_variation=4.0, steps=None):
    """Monotone staircase on ``0..n-1`` with ``steps`` equal jumps summing to ``total_variation``.

    ``steps`` defaults to ``round(n ** (1/3))``, which keeps the total
    variation fixed while the number of pieces grows with ``n``.
    """
    n = int(n)
    steps = max(1, round(n ** (1.0 / 3.0))) if steps is None else int(steps)
    level = np.floor(np.arange(n) * (steps + 1) / n)
    return level * (total_variation / steps)


def rate_sweep(n_list=(64, 128, 256, 512, 1024, 2048), reps=20, seed=0, sigma=1.0,
               total_variation=4.0, n_lambda=30):
    """Empirical MSE exponent of the chain fused lasso with oracle-tuned lambda.

    For each ``n`` and replicate, the lambda minimizing the true MSE over a
    ``n_lambda``-point geometric grid (from ``1e-3`` to ``1`` times
    ``lambda_crit``) is used. Returns a report whose ``computed`` field is
    the least-squares slope of log mean MSE on log ``n``; ``extra`` carries
    per-``n`` means and a 95% interval for the slope from replicate-level
    regression.
    """
    n_list = [int(n) for n in n_list]
    if len(n_list) < 2 or max(n_list) / min(n_list) < 16:
        raise InvalidParameter("n_list must span at least four octaves")
    if reps < 20:
        raise InvalidParameter("reps must be >= 20")
    if not sigma > 0:
        raise InvalidParameter("sigma must be positive")
    means = []
    xs, ys = [], []
    for n in n_list:
        g = chain(n)
        beta0 = staircase_signal(n, total_variation)
        errs = []
        for r in range(reps):
            rng = np.random.default_rng([seed, n, r])
            y = beta0 + sigma * rng.standard_normal(n)
            top = max(lambda_crit(y, g, 0, method="iterative" if n > 500 else "dense"), 1e-12)
            best = min(
                mse(tv_denoise(g, y, lam), beta0) for lam in np.geomspace(top * 1e-3, top, n_lambda)
            )
            errs.append(best)
            xs.append(math.log(n))
            ys.append(math.log(best))
        means.append(float(np.mean(errs)))
    slope = float(np.polyfit(np.log(n_list), np.log(means), 1)[0])
    X = np.column_stack([np.ones(len(xs)), xs])
    coef, res, _, _ = np.linalg.lstsq(X, np.asarray(ys), rcond=None)
    resid = np.asarray(ys) - X @ coef
    s2 = float(resid @ resid) / (len(ys) - 2)
    se = math.sqrt(s2 * np.linalg.inv(X.T @ X)[1, 1])
    ci = (float(coef[1] - 1.96 * se), float(coef[1] + 1.96 * se))
    rep = TheoryReport(
        "rate",
        {"n": n_list, "reps": reps, "seed": seed, "sigma": sigma},
        slope,
        -2.0 / 3.0,
        -0.85 <= slope <= -0.50,
        0.0,
        "band",
        {"mean_mse": means, "slope_ci": ci, "band": (-0.85, -0.50)},
    )
    return rep


# -- Erdos-Renyi spectral gap -------------------------------------------------


def er_lambda_min_ratios(n=200, degrees=(8, 16), seeds=range(10)):
    """``lambda_2(L) / (d - sqrt(d))`` for Erdos-Renyi graphs of expected degree ``d``.

    Reported only: the lower bound hides an unspecified constant.
    """
    out = []
    for d in degrees:
        ratios = []
        for s in seeds:
            g = erdos_renyi(n, d / (n - 1), seed=s)
            ev = np.linalg.eigvalsh(g.laplacian.toarray())
            ratios.append(float(ev[1] / (d - math.sqrt(d))))
        out.append(
            TheoryReport(
                "er-lambda-min",
                {"n": n, "d": d, "seeds": list(seeds)},
                min(ratios),
                0.0,
                True,
                0.0,
                "report",
                {"ratios": ratios},
            )
        )
    return out


# -- suite --------------------------------------------------------------------


def _eig_checks(n=None):
    reps = []
    for m in ([n] if n else [2, 8, 16, 64]):
        vals, U = chain_neumann_eigenpairs(m)
        L = chain(m).laplacian.toarray()
        reps.append(TheoryReport.equality("neumann-eigenpairs", {"n": m},
                                          float(np.abs(L @ U - U * vals).max()), 0.0))
        reps.append(TheoryReport.equality("neumann-orthonormal", {"n": m},
                                          float(np.abs(U.T @ U - np.eye(m)).max()), 0.0, 1e-10))
        num = np.linalg.eigvalsh(L)
        reps.append(TheoryReport.equality("neumann-eigenvalues", {"n": m},
                                          float(np.abs(np.sort(vals) - num).max()), 0.0))
        V = chain_dirichlet_eigenvectors(m)
        D = chain(m).incidence.toarray()
        DDt = D @ D.T
        dv = chain_dirichlet_eigenvalues(m)
        reps.append(TheoryReport.equality("dirichlet-eigenpairs", {"n": m},
                                          float(np.abs(DDt @ V - V * dv).max()), 0.0))
    for l in ([int(round(math.sqrt(n)))] if n else [2, 4, 8]):
        vals, W = grid_eigenpairs(l, l)
        L = grid2d(l, l).laplacian.toarray()
        reps.append(TheoryReport.equality("grid-eigenpairs", {"rows": l, "cols": l},
                                          float(np.abs(L @ W - W * vals).max()), 0.0))
        reps.append(TheoryReport.equality("grid-eigenvalues", {"rows": l, "cols": l},
                                          float(np.abs(np.sort(vals) - np.linalg.eigvalsh(L)).max()), 0.0))
        reps.append(TheoryReport.upper("grid-max-entry", {"rows": l, "cols": l},
                                       float(np.abs(W).max()), 2.0 / l))
    return reps


def _incoherence_checks(n=None):
    reps = []
    for m in ([n] if n else [8, 64]):
        _, U = chain_neumann_eigenpairs(m)
        reps.append(TheoryReport.upper("mu-chain-neumann", {"n": m}, incoherence_constant(U), math.sqrt(2)))
        V = chain_dirichlet_eigenvectors(m)
        reps.append(TheoryReport.upper("mu-chain-dirichlet", {"n": m},
                                       incoherence_constant(V, m), math.sqrt(2)))
    for l in ([int(round(math.sqrt(n)))] if n else [4, 8]):
        _, W = grid_eigenpairs(l, l)
        reps.append(TheoryReport.upper("mu-grid-laplacian", {"rows": l, "cols": l},
                                       incoherence_constant(W), 2.0))
        g = grid2d(l, l)
        vals, V = grid_incidence_eigenvectors(l, l)
        DDt = (g.incidence @ g.incidence.T).toarray()
        reps.append(TheoryReport.equality("grid-incidence-eigenpairs", {"rows": l, "cols": l},
                                          float(np.abs(DDt @ V - V * vals).max()), 0.0))
        reps.append(TheoryReport.upper("mu-grid-incidence", {"rows": l, "cols": l},
                                       incoherence_constant(V, g.n), 4.0))
    return reps


def _covering(n=None):
    n = n or 100
    reports = [covering_check_fused_lasso(n, j) for j in range(1, 2 * (n - 1) + 1)]
    worst = max(reports, key=lambda r: r.computed / r.bound)
    return [
        TheoryReport(
            "covering",
            {"n": n, "j": "1..%d" % (2 * (n - 1)), "worst_j": worst.params["j"]},
            worst.computed / worst.bound,
            1.0,
            all(r.passed for r in reports),
            INEQ_SLACK,
            "inequality",
        )
    ]


def _scaling(n=None):
    return [pinv_norm_scaling(k) for k in (0, 1, 2)]


CHECKS = {
    "eigen": _eig_checks,
    "incoherence": _incoherence_checks,
    "covering": _covering,
    "atoms": lambda n=None: [atom_distance_check(n or 50)],
    "pinv-scaling": _scaling,
    "er-lambda-min": lambda n=None: er_lambda_min_ratios(n or 200),
    "rate": lambda n=None: [rate_sweep()],
}
# the rate sweep takes minutes; it runs only when asked for by name
DEFAULT_CHECKS = ("eigen", "incoherence", "covering", "atoms", "pinv-scaling", "er-lambda-min")


def run_suite(checks=None, n=None):
    names = DEFAULT_CHECKS if not checks else list(checks)
    out = []
    for name in names:
        if name not in CHECKS:
            raise InvalidParameter(f"unknown check {name!r}; choose from {sorted(CHECKS)}")
        out.extend(CHECKS[name](n))
    return out
