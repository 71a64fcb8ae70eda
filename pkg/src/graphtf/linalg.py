"""Preconditioned conjugate gradient and Laplacian helpers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = ["CGResult", "pcg", "laplacian_power_colnorms", "laplacian_power_apply"]


@dataclass
class CGResult:
    x: np.ndarray
    iterations: int
    converged: bool
    residual: float


def pcg(matvec, b, diag=None, x0=None, rtol=1e-10, atol=0.0, max_iter=None):
    """Solve ``A x = b`` for symmetric positive (semi)definite ``A``.

    ``diag`` is the Jacobi preconditioner (the diagonal of ``A``); zero
    entries are treated as one. Stops when ``||r|| <= max(rtol*||b||, atol)``.
    Singular but consistent systems converge to a solution in the range of
    ``A`` when started from zero.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if max_iter is None:
        max_iter = max(10 * n, 100)
    if diag is None:
        inv = np.ones(n)
    else:
        d = np.asarray(diag, dtype=float)
        inv = np.where(d > 0, 1.0 / np.where(d > 0, d, 1.0), 1.0)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - matvec(x) if x0 is not None else b.copy()
    bnorm = np.linalg.norm(b)
    stop = max(rtol * bnorm, atol)
    rnorm = np.linalg.norm(r)
    if rnorm <= stop:
        return CGResult(x, 0, True, rnorm)
    z = inv * r
    p = z.copy()
    rz = r @ z
    for it in range(1, max_iter + 1):
        Ap = matvec(p)
        pAp = p @ Ap
        if pAp <= 0:
            return CGResult(x, it, False, rnorm)
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        rnorm = np.linalg.norm(r)
        if rnorm <= stop:
            return CGResult(x, it, True, rnorm)
        z = inv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return CGResult(x, max_iter, False, rnorm)


def laplacian_power_apply(L, x, power):
    for _ in range(power):
        x = L @ x
    return x


def laplacian_power_colnorms(L, power):
    """Squared column norms of ``L^power``, i.e. the diagonal of ``L^(2*power)``."""
    n = L.shape[0]
    if power == 0:
        return np.ones(n)
    M = sp.csr_matrix(L)
    for _ in range(power - 1):
        M = sp.csr_matrix(L @ M)
    return np.asarray(M.multiply(M).sum(axis=0)).ravel()
