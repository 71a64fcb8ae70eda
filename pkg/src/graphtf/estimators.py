"""scikit-learn style wrappers around the functional solvers.

Signals are rows: ``X`` has shape ``(n_signals, n_nodes)`` (a 1-D array is
one signal). The graph is a constructor parameter, so ``get_params`` and
``clone`` work as usual.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import IndexOutOfRange, InvalidParameter
from .model_eval import estimate_df
from .solvers import SolverOptions, laplacian_smooth, solve, sparse_gtf
from .transduction import MadProblem, mad_gtf, mad_laplacian
from .validation import (
    check_graph,
    check_labels,
    check_nonnegative,
    check_order,
    check_positive,
    check_signals,
)

__all__ = ["GraphTrendFilter", "LaplacianSmoother", "MadClassifier"]


class _SignalTransformer(TransformerMixin, BaseEstimator):
    def _denoise(self, y):
        raise NotImplementedError

    def _validate(self):
        check_graph(self.graph)
        check_order(self.k)
        check_nonnegative(self.lam, "lam")

    def fit(self, X, y=None):
        self._validate()
        X2, was_1d = check_signals(X, self.graph.n)
        out = [self._denoise(row) for row in X2]
        self.coef_ = np.vstack([o[0] for o in out])
        self._record([o[1] for o in out])
        if was_1d:
            self.coef_ = self.coef_[0]
        self.n_features_in_ = self.graph.n
        return self

    def _record(self, fits):
        pass

    def transform(self, X):
        self._validate()
        X2, was_1d = check_signals(X, self.graph.n)
        out = np.vstack([self._denoise(row)[0] for row in X2])
        return out[0] if was_1d else out

    def fit_transform(self, X, y=None):
        return self.fit(X).coef_

    def predict(self, X):
        return self.transform(X)

    def score(self, X, y):
        """Negative mean squared error of the denoised ``X`` against ``y``."""
        pred = self.transform(X)
        return -float(np.mean((pred - np.asarray(y, dtype=float)) ** 2))


class GraphTrendFilter(_SignalTransformer):
    """Graph trend filtering of order ``k``.

    Parameters
    ----------
    graph : Graph
    k : int
        Order; the penalty uses the (k+1)-th graph difference operator.
    lam : float
        Weight of the l1 penalty.
    lam2 : float
        Optional extra l1 penalty on the fit itself (sparse variant).
    method : {"auto", "admm", "newton", "maxflow"}
    rho, tol, max_iter : solver options.

    Attributes
    ----------
    coef_ : fitted signal(s) for the data passed to ``fit``.
    fits_ : list of ``GtfFit`` records, one per row.
    df_, n_iter_, converged_ : per-row arrays.
    """

    def __init__(self, graph, k=0, lam=1.0, lam2=0.0, method="auto", rho=None, tol=1e-8, max_iter=5000):
        self.graph = graph
        self.k = k
        self.lam = lam
        self.lam2 = lam2
        self.method = method
        self.rho = rho
        self.tol = tol
        self.max_iter = max_iter

    def _validate(self):
        super()._validate()
        check_nonnegative(self.lam2, "lam2")
        check_positive(self.tol, "tol")
        if self.rho is not None:
            check_positive(self.rho, "rho")

    def _options(self):
        return SolverOptions(rho=self.rho, max_iterations=int(self.max_iter), tolerance=float(self.tol))

    def _denoise(self, y):
        if self.lam2:
            fit = sparse_gtf(y, self.graph, self.k, self.lam, self.lam2, self._options())
        else:
            fit = solve(y, self.graph, self.k, self.lam, method=self.method, opts=self._options())
        return fit.beta, fit

    def _record(self, fits):
        self.fits_ = fits
        self.df_ = np.array([estimate_df(f, self.graph) for f in fits])
        self.n_iter_ = np.array([f.iterations for f in fits])
        self.converged_ = np.array([f.converged for f in fits])


class LaplacianSmoother(_SignalTransformer):
    """Quadratic baseline ``(I + lam L^(k+1))^{-1} y``."""

    def __init__(self, graph, k=0, lam=1.0):
        self.graph = graph
        self.k = k
        self.lam = lam

    def _denoise(self, y):
        return laplacian_smooth(y, self.graph, self.k, self.lam), None


class MadClassifier(ClassifierMixin, BaseEstimator):
    """Transductive label imputation on a graph.

    ``fit(X, y)`` takes ``y`` of length ``n_nodes`` with ``-1`` on unlabelled
    nodes; ``X`` is ignored and may be None. ``predict(X)`` returns labels
    for the node indices in ``X`` (all nodes when ``X`` is None).
    ``penalty="l2"`` gives the Laplacian-regularized baseline.
    """

    def __init__(self, graph, k=0, lam=1.0, epsilon=0.01, penalty="gtf", prior=None):
        self.graph = graph
        self.k = k
        self.lam = lam
        self.epsilon = epsilon
        self.penalty = penalty
        self.prior = prior

    def fit(self, X, y):
        check_graph(self.graph)
        k = check_order(self.k)
        lam = check_nonnegative(self.lam, "lam")
        eps = check_positive(self.epsilon, "epsilon")
        if self.penalty not in ("gtf", "l2"):
            raise InvalidParameter(f"penalty must be 'gtf' or 'l2', got {self.penalty!r}")
        y = check_labels(y, self.graph.n)
        self.classes_ = np.unique(y[y >= 0])
        coded = np.searchsorted(self.classes_, y[y >= 0])
        nodes = np.flatnonzero(y >= 0)
        p = MadProblem.from_seeds(self.graph, nodes, coded, n_classes=len(self.classes_),
                                  R=self.prior, epsilon=eps, lam=lam, k=k)
        fit = mad_gtf(p) if self.penalty == "gtf" else mad_laplacian(p)
        self.fit_ = fit
        self.scores_ = fit.B
        self.transduction_ = self.classes_[fit.labels]
        self.n_features_in_ = 1
        return self

    def _nodes(self, X):
        if X is None:
            return slice(None)
        idx = np.asarray(X).reshape(-1).astype(np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= self.graph.n):
            raise IndexOutOfRange("node index out of range")
        return idx

    def decision_function(self, X=None):
        check_is_fitted(self, "scores_")
        return self.scores_[self._nodes(X)]

    def predict(self, X=None):
        check_is_fitted(self, "transduction_")
        return self.transduction_[self._nodes(X)]

    def score(self, X, y):
        """Accuracy on the node indices ``X`` against labels ``y``."""
        return float(np.mean(self.predict(X) == np.asarray(y)))
