"""Undirected weighted graphs, their incidence and Laplacian matrices."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components as _cc

from .exceptions import (
    DuplicateEdge,
    IndexOutOfRange,
    InvalidParameter,
    SelfLoop,
)

__all__ = [
    "Graph",
    "ComponentLabeling",
    "build_graph",
    "incidence_matrix",
    "laplacian",
    "connected_components",
    "chain",
    "grid2d",
    "grid_coordinates",
    "erdos_renyi",
    "knn_graph",
    "star",
]


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable undirected graph on nodes ``0..n-1``.

    Edges are stored canonically: ``src[l] < dst[l]``, sorted
    lexicographically, with strictly positive weights. Use
    :func:`build_graph` rather than calling the constructor directly.
    """

    n: int
    src: np.ndarray = field(repr=False)
    dst: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def m(self):
        return len(self.src)

    @property
    def edges(self):
        return [(int(i), int(j), float(w)) for i, j, w in zip(self.src, self.dst, self.weights)]

    @property
    def is_unweighted(self):
        return bool(np.all(self.weights == 1.0))

    @cached_property
    def incidence(self):
        m, n = self.m, self.n
        rows = np.repeat(np.arange(m), 2)
        cols = np.column_stack([self.src, self.dst]).ravel()
        vals = np.column_stack([-self.weights, self.weights]).ravel()
        D = sp.csr_matrix((vals, (rows, cols)), shape=(m, n))
        D.sort_indices()
        return D

    @cached_property
    def laplacian(self):
        D = self.incidence
        L = (D.T @ D).tocsr()
        L.sort_indices()
        return L

    @cached_property
    def degree(self):
        """Number of neighbours of each node (ignores weights)."""
        return np.bincount(np.concatenate([self.src, self.dst]), minlength=self.n)

    @cached_property
    def adjacency_csr(self):
        """(indptr, neighbour, edge_id) arrays listing each node's incident edges."""
        n = self.n
        ends = np.concatenate([self.src, self.dst])
        other = np.concatenate([self.dst, self.src])
        eid = np.concatenate([np.arange(self.m), np.arange(self.m)])
        order = np.lexsort((other, ends))
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.cumsum(np.bincount(ends, minlength=n), out=indptr[1:])
        return (
            _frozen(indptr),
            _frozen(other[order].astype(np.int64)),
            _frozen(eid[order].astype(np.int64)),
        )

    def components(self):
        return connected_components(self)

    def is_connected(self):
        return self.n > 0 and connected_components(self).count == 1

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.n == other.n
            and np.array_equal(self.src, other.src)
            and np.array_equal(self.dst, other.dst)
            and np.array_equal(self.weights, other.weights)
        )

    def __hash__(self):
        return hash((self.n, self.src.tobytes(), self.dst.tobytes(), self.weights.tobytes()))


@dataclass(frozen=True)
class ComponentLabeling:
    labels: np.ndarray
    count: int

    def members(self, c):
        return np.flatnonzero(self.labels == c)


def build_graph(n, edges):
    """Validate and canonicalize an edge list into a :class:`Graph`.

    ``edges`` is a sequence of ``(i, j)`` or ``(i, j, w)`` tuples, or an
    array with two or three columns. Missing weights default to 1.
    """
    n = int(n)
    if n < 1:
        raise InvalidParameter(f"node count must be positive, got {n}")
    if isinstance(edges, (list, tuple)) and any(len(e) == 2 for e in edges) and any(len(e) == 3 for e in edges):
        edges = [tuple(e) + (1.0,) if len(e) == 2 else tuple(e) for e in edges]
    arr = np.asarray(edges, dtype=float)
    if arr.size == 0:
        arr = np.zeros((0, 3))
    if arr.ndim != 2 or arr.shape[1] not in (2, 3):
        raise InvalidParameter("edges must be (i, j) or (i, j, w) tuples")
    if arr.shape[1] == 2:
        arr = np.column_stack([arr, np.ones(len(arr))])
    ij = arr[:, :2]
    if np.any(ij != np.round(ij)):
        raise InvalidParameter("edge endpoints must be integers")
    i = ij[:, 0].astype(np.int64)
    j = ij[:, 1].astype(np.int64)
    w = arr[:, 2].copy()
    bad = (i < 0) | (i >= n) | (j < 0) | (j >= n)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise IndexOutOfRange(f"edge {k} = ({i[k]}, {j[k]}) has an endpoint outside 0..{n - 1}")
    loops = i == j
    if np.any(loops):
        k = int(np.flatnonzero(loops)[0])
        raise SelfLoop(f"edge {k} is a self-loop on node {i[k]}")
    if np.any(~(w > 0)) or not np.all(np.isfinite(w)):
        raise InvalidParameter("edge weights must be finite and strictly positive")
    lo = np.minimum(i, j)
    hi = np.maximum(i, j)
    order = np.lexsort((hi, lo))
    lo, hi, w = lo[order], hi[order], w[order]
    if len(lo) > 1:
        dup = (lo[1:] == lo[:-1]) & (hi[1:] == hi[:-1])
        if np.any(dup):
            k = int(np.flatnonzero(dup)[0])
            raise DuplicateEdge(f"edge ({lo[k]}, {hi[k]}) appears more than once")
    return Graph(n, _frozen(lo), _frozen(hi), _frozen(w))


def incidence_matrix(g):
    """Weighted oriented incidence matrix (m x n, CSR).

    Row ``l`` for edge ``(i, j)``, ``i < j``, is ``-w`` at column ``i`` and
    ``+w`` at column ``j``.
    """
    return g.incidence


def laplacian(g):
    """``D.T @ D`` for the weighted incidence matrix; carries squared weights."""
    return g.laplacian


def connected_components(g, excluded_edges=()):
    """Components of ``g`` after deleting the edges indexed by ``excluded_edges``.

    Component ids are assigned in order of each component's smallest node.
    """
    excl = np.asarray(sorted(set(int(e) for e in excluded_edges)), dtype=np.int64)
    if excl.size and (excl[0] < 0 or excl[-1] >= g.m):
        raise IndexOutOfRange(f"excluded edge index out of range 0..{g.m - 1}")
    keep = np.ones(g.m, dtype=bool)
    keep[excl] = False
    A = sp.csr_matrix(
        (np.ones(int(keep.sum())), (g.src[keep], g.dst[keep])), shape=(g.n, g.n)
    )
    count, raw = _cc(A, directed=False)
    # relabel so ids follow first appearance in node order
    first = np.full(count, g.n, dtype=np.int64)
    np.minimum.at(first, raw, np.arange(g.n))
    rank = np.empty(count, dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(count)
    return ComponentLabeling(_frozen(rank[raw]), int(count))


# -- generators ---------------------------------------------------------------


def chain(n):
    n = int(n)
    if n < 1:
        raise InvalidParameter("chain length must be >= 1")
    i = np.arange(n - 1)
    return build_graph(n, np.column_stack([i, i + 1]))


def star(leaves):
    """Node 0 joined to nodes ``1..leaves``."""
    return build_graph(leaves + 1, [(0, j) for j in range(1, leaves + 1)])


def grid2d(rows, cols):
    """4-neighbour grid; node ``r * cols + c`` sits at row ``r``, column ``c``."""
    rows, cols = int(rows), int(cols)
    if rows < 1 or cols < 1:
        raise InvalidParameter("grid dimensions must be >= 1")
    idx = np.arange(rows * cols).reshape(rows, cols)
    horiz = np.column_stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()])
    vert = np.column_stack([idx[:-1, :].ravel(), idx[1:, :].ravel()])
    return build_graph(rows * cols, np.concatenate([horiz, vert]))


def grid_coordinates(rows, cols):
    """(n, 2) array of (row, col) positions matching :func:`grid2d` numbering."""
    r, c = np.divmod(np.arange(rows * cols), cols)
    return np.column_stack([r, c]).astype(float)


def erdos_renyi(n, p, seed=None):
    n = int(n)
    if n < 1:
        raise InvalidParameter("n must be >= 1")
    if not 0 < p <= 1:
        raise InvalidParameter(f"edge probability must lie in (0, 1], got {p}")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < p
    return build_graph(n, np.column_stack([iu[keep], ju[keep]]))


def knn_graph(points, k, chunk=2048):
    """Symmetrized k-nearest-neighbour graph under Euclidean distance.

    ``i ~ j`` when either is among the other's ``k`` nearest points. Equal
    distances are resolved in favour of the lower index.
    """
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = len(X)
    k = int(k)
    if not 1 <= k < n:
        raise InvalidParameter(f"k must satisfy 1 <= k < {n}, got {k}")
    sq = np.einsum("ij,ij->i", X, X)
    pairs = []
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * X[start:stop] @ X.T
        np.maximum(d2, 0.0, out=d2)
        d2[np.arange(stop - start), np.arange(start, stop)] = np.inf
        nbr = np.argsort(d2, axis=1, kind="stable")[:, :k]
        rows = np.repeat(np.arange(start, stop), k)
        pairs.append(np.column_stack([rows, nbr.ravel()]))
    P = np.concatenate(pairs)
    P = np.unique(np.sort(P, axis=1), axis=0)
    return build_graph(n, P)
