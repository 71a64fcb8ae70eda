"""Input checks shared by the estimator classes."""

from __future__ import annotations

import numbers

import numpy as np

from .exceptions import DimensionMismatch, InvalidParameter
from .graph import Graph

__all__ = ["check_graph", "check_signals", "check_order", "check_nonnegative", "check_positive", "check_labels"]


def check_graph(graph):
    if not isinstance(graph, Graph):
        raise InvalidParameter(f"expected a Graph, got {type(graph).__name__}")
    return graph


def check_signals(X, n):
    """Return ``(X2d, was_1d)`` with one graph signal per row of ``X2d``."""
    X = np.asarray(X, dtype=float)
    was_1d = X.ndim == 1
    if was_1d:
        X = X[None, :]
    if X.ndim != 2:
        raise DimensionMismatch(f"signals must be 1-D or 2-D, got {X.ndim}-D")
    if X.shape[1] != n:
        raise DimensionMismatch(f"signals have {X.shape[1]} entries per row, graph has {n} nodes")
    if not np.all(np.isfinite(X)):
        raise InvalidParameter("signals contain NaN or inf")
    return X, was_1d


def check_order(k):
    if isinstance(k, bool) or not isinstance(k, numbers.Integral) or k < 0:
        raise InvalidParameter(f"order k must be a non-negative integer, got {k!r}")
    return int(k)


def check_nonnegative(value, name):
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value < 0:
        raise InvalidParameter(f"{name} must be a finite number >= 0, got {value!r}")
    return float(value)


def check_positive(value, name):
    if check_nonnegative(value, name) == 0:
        raise InvalidParameter(f"{name} must be positive")
    return float(value)


def check_labels(y, n):
    """Node labels with ``-1`` marking unlabelled nodes."""
    y = np.asarray(y)
    if y.shape != (n,):
        raise DimensionMismatch(f"labels must have shape ({n},), got {y.shape}")
    if not np.issubdtype(y.dtype, np.integer):
        if not np.all(np.equal(np.mod(y, 1), 0)):
            raise InvalidParameter("labels must be integers")
        y = y.astype(np.int64)
    if np.any(y < -1):
        raise InvalidParameter("labels must be >= -1 (-1 means unlabelled)")
    if not np.any(y >= 0):
        raise InvalidParameter("at least one node must be labelled")
    return y.astype(np.int64)
