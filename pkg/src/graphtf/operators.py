"""Graph and univariate difference operators.

The graph operator of order ``k + 1`` is kept in factored form: ``q``
Laplacian multiplications followed, for even ``k``, by one incidence
multiplication. Nothing beyond ``L`` itself is ever materialized unless
:meth:`DifferenceOperator.tosparse` or :meth:`DifferenceOperator.toarray`
is called explicitly.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, lsqr

from .exceptions import (
    DimensionMismatch,
    InvalidParameter,
    NotAChain,
    TooLarge,
    UnsupportedOrder,
    WeightedGraph,
)

__all__ = [
    "DifferenceOperator",
    "graph_difference_operator",
    "penalty_value",
    "elementwise_penalty",
    "univariate_difference_operator",
    "boundary_trim",
    "boundary_sign",
    "is_chain",
    "pseudoinverse",
    "max_column_norm_pinv",
    "RANK_RTOL",
    "DENSE_LIMIT",
]

RANK_RTOL = 1e-10
DENSE_LIMIT = 500
_DENSIFY_LIMIT = 2000


class DifferenceOperator:
    """The graph difference operator of order ``k + 1``.

    For odd ``k`` this is ``L^((k+1)/2)`` (``n`` rows); for even ``k`` it is
    ``D L^(k/2)`` (``m`` rows, one per edge).
    """

    def __init__(self, graph, k):
        k = int(k)
        if k < 0:
            raise InvalidParameter(f"order k must be >= 0, got {k}")
        self.graph = graph
        self.k = k

    @property
    def parity(self):
        return "odd" if self.k % 2 else "even"

    @property
    def q(self):
        """Number of Laplacian factors."""
        return (self.k + 1) // 2 if self.k % 2 else self.k // 2

    @property
    def rows(self):
        return self.graph.n if self.k % 2 else self.graph.m

    @property
    def shape(self):
        return (self.rows, self.graph.n)

    @property
    def stages(self):
        """Factor names, applied right to left."""
        return ["D"] * (self.k % 2 == 0) + ["L"] * self.q

    def __repr__(self):
        return f"DifferenceOperator(k={self.k}, shape={self.shape})"

    def _check(self, x, size, what):
        x = np.asarray(x, dtype=float)
        if x.shape[0] != size:
            raise DimensionMismatch(f"{what} has length {x.shape[0]}, expected {size}")
        return x

    def apply(self, x):
        x = self._check(x, self.graph.n, "input")
        L = self.graph.laplacian
        for _ in range(self.q):
            x = L @ x
        if self.k % 2 == 0:
            x = self.graph.incidence @ x
        return x

    def apply_transpose(self, v):
        v = self._check(v, self.rows, "row-space vector")
        if self.k % 2 == 0:
            v = self.graph.incidence.T @ v
        L = self.graph.laplacian
        for _ in range(self.q):
            v = L @ v
        return v

    __matmul__ = apply

    def laplacian_power_apply(self, x, power=None):
        """``L^power @ x``; ``power`` defaults to :attr:`q`."""
        L = self.graph.laplacian
        for _ in range(self.q if power is None else power):
            x = L @ x
        return x

    def as_linear_operator(self):
        return LinearOperator(
            self.shape, matvec=self.apply, rmatvec=self.apply_transpose, dtype=float
        )

    def tosparse(self):
        M = sp.identity(self.graph.n, format="csr")
        L = self.graph.laplacian
        for _ in range(self.q):
            M = L @ M
        if self.k % 2 == 0:
            M = self.graph.incidence @ M
        return sp.csr_matrix(M)

    def toarray(self, force=False):
        if self.graph.n > _DENSIFY_LIMIT and not force:
            raise TooLarge(f"refusing to densify an operator with n={self.graph.n}")
        return self.tosparse().toarray()


def graph_difference_operator(g, k):
    return DifferenceOperator(g, k)


def penalty_value(op, beta):
    """``||op @ beta||_1``."""
    return float(np.abs(op.apply(beta)).sum())


def elementwise_penalty(g, k, beta):
    """The penalty written node-by-node / edge-by-edge for k = 0, 1, 2.

    Only defined for unit edge weights.
    """
    if k not in (0, 1, 2):
        raise UnsupportedOrder(f"elementwise formula only exists for k <= 2, got {k}")
    if not g.is_unweighted:
        raise WeightedGraph("elementwise formulas assume unit edge weights")
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (g.n,):
        raise DimensionMismatch(f"signal has shape {beta.shape}, expected ({g.n},)")
    i, j = g.src, g.dst
    if k == 0:
        return float(np.abs(beta[i] - beta[j]).sum())
    deg = g.degree.astype(float)
    nbr_sum = np.bincount(i, weights=beta[j], minlength=g.n) + np.bincount(
        j, weights=beta[i], minlength=g.n
    )
    # n_i * (beta_i - mean of neighbours); isolated nodes contribute 0
    with np.errstate(invalid="ignore", divide="ignore"):
        avg = np.where(deg > 0, nbr_sum / np.maximum(deg, 1), beta)
    local = deg * (beta - avg)
    if k == 1:
        return float(np.abs(local).sum())
    return float(np.abs(local[i] - local[j]).sum())


def univariate_difference_operator(n, k):
    """Sparse ``(n-k-1) x n`` discrete difference matrix of order ``k + 1``."""
    n, k = int(n), int(k)
    if k < 0 or n < k + 2:
        raise InvalidParameter(f"need k >= 0 and n >= k + 2, got n={n}, k={k}")

    def first_diff(size):
        return sp.diags([-np.ones(size - 1), np.ones(size - 1)], [0, 1], shape=(size - 1, size))

    D = first_diff(n)
    for j in range(1, k + 1):
        D = first_diff(n - j) @ D
    return sp.csr_matrix(D)


def is_chain(g):
    if not g.is_unweighted:
        return False
    return g.m == g.n - 1 and np.array_equal(g.src, np.arange(g.n - 1)) and np.array_equal(
        g.dst, np.arange(1, g.n)
    )


def boundary_trim(g, k):
    """Rows of the chain-graph operator that are boundary terms.

    Removing them leaves ``boundary_sign(k) * univariate_difference_operator(n, k)``.
    """
    if not is_chain(g):
        raise NotAChain("boundary_trim needs an unweighted chain 0-1-...-(n-1)")
    k = int(k)
    h = (k + 1) // 2 if k % 2 else k // 2
    rows = DifferenceOperator(g, k).rows
    return sorted(set(range(h)) | set(range(rows - h, rows)))


def boundary_sign(k):
    """Global sign relating interior chain rows to the univariate operator.

    Interior rows of ``L`` read ``(-1, 2, -1)`` while the univariate second
    difference reads ``(1, -2, 1)``, so each Laplacian factor beyond the
    first difference contributes a factor of -1.
    """
    return -1.0 if ((int(k) + 1) // 2) % 2 else 1.0


def _as_matrix(op):
    if isinstance(op, DifferenceOperator):
        return op.tosparse()
    if sp.issparse(op):
        return sp.csr_matrix(op)
    return np.asarray(op, dtype=float)


def pseudoinverse(op, limit=DENSE_LIMIT):
    """Dense Moore-Penrose pseudoinverse; singular values <= 1e-10 * max are null."""
    A = _as_matrix(op)
    if max(A.shape) > limit:
        raise TooLarge(f"dense pseudoinverse refused for shape {A.shape} (limit {limit})")
    A = A.toarray() if sp.issparse(A) else A
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    keep = s > RANK_RTOL * (s[0] if s.size else 0.0)
    return (Vt[keep].T / s[keep]) @ U[:, keep].T


def singular_values(op, limit=DENSE_LIMIT):
    A = _as_matrix(op)
    if max(A.shape) > limit:
        raise TooLarge(f"dense SVD refused for shape {A.shape} (limit {limit})")
    A = A.toarray() if sp.issparse(A) else A
    return np.linalg.svd(A, compute_uv=False)


def max_column_norm_pinv(op, method="dense", limit=DENSE_LIMIT):
    """Largest column 2-norm of the pseudoinverse of ``op``.

    ``method="dense"`` uses an SVD (refused above ``limit``);
    ``method="iterative"`` solves one minimum-norm least-squares problem per
    column with LSQR and has no size limit.
    """
    if method == "dense":
        P = pseudoinverse(op, limit=limit)
        return float(np.sqrt((P * P).sum(axis=0)).max()) if P.size else 0.0
    if method != "iterative":
        raise InvalidParameter(f"unknown method {method!r}")
    A = op.as_linear_operator() if isinstance(op, DifferenceOperator) else _as_matrix(op)
    r = A.shape[0]
    best = 0.0
    e = np.zeros(r)
    for j in range(r):
        e[j] = 1.0
        x = lsqr(A, e, atol=1e-14, btol=1e-14, iter_lim=20 * max(A.shape))[0]
        e[j] = 0.0
        best = max(best, float(np.linalg.norm(x)))
    return best
