"""Synthetic ground-truth signals and noise."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionMismatch, Disconnected, InvalidParameter
from .linalg import pcg

__all__ = [
    "gaussian_mixture_signal",
    "random_mixture_centers",
    "poisson_equation_signal",
    "random_walk_signal",
    "add_noise",
    "spectral_coordinates",
    "SyntheticInstance",
    "make_instance",
    "GENERATORS",
]

GENERATORS = ("mixture", "poisson-dense", "poisson-sparse", "random-walk")


def gaussian_mixture_signal(coords, centers):
    """``x_i = sum_c amp_c * exp(-||coord_i - mean_c||^2 / (2 scale_c^2))``.

    ``centers`` is a sequence of ``(mean, scale, amplitude)`` triples.
    """
    X = np.asarray(coords, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch("coords must be an (n, d) array")
    x = np.zeros(len(X))
    for mean, scale, amp in centers:
        mean = np.asarray(mean, dtype=float)
        if mean.shape != (X.shape[1],):
            raise DimensionMismatch(f"center {mean} does not match coordinate dimension {X.shape[1]}")
        if not scale > 0:
            raise InvalidParameter("mixture scales must be positive")
        d2 = np.sum((X - mean) ** 2, axis=1)
        x += amp * np.exp(-d2 / (2.0 * scale**2))
    return x


def random_mixture_centers(coords, count=5, seed=None):
    """Seeded centers inside the bounding box of ``coords``."""
    X = np.asarray(coords, dtype=float)
    rng = np.random.default_rng(seed)
    lo, hi = X.min(axis=0), X.max(axis=0)
    extent = float(np.max(hi - lo)) or 1.0
    out = []
    for _ in range(count):
        mean = lo + rng.random(X.shape[1]) * (hi - lo)
        scale = extent * rng.uniform(0.05, 0.2)
        amp = rng.uniform(0.5, 2.0)
        out.append((mean, scale, amp))
    return out


def spectral_coordinates(g, dim=2):
    """Laplacian eigenmap coordinates; signs fixed so each column's largest entry is positive."""
    if g.n <= dim + 1:
        return np.column_stack([np.arange(g.n, dtype=float)] * dim)
    vals, vecs = np.linalg.eigh(g.laplacian.toarray())
    V = vecs[:, 1 : dim + 1]
    flip = np.sign(V[np.argmax(np.abs(V), axis=0), np.arange(dim)])
    return V * flip


def poisson_equation_signal(g, mode="dense", nnz=30, seed=None, return_rhs=False):
    """Solve ``L x = b`` on the mean-zero subspace for a random right-hand side.

    ``mode="dense"`` draws every entry of ``b`` standard normal;
    ``mode="sparse"`` draws ``nnz`` nonzero entries at random nodes. ``b`` is
    centred before solving. With ``return_rhs`` the uncentred ``b`` is also
    returned.
    """
    if not g.is_connected():
        raise Disconnected("the Poisson generator needs a connected graph")
    rng = np.random.default_rng(seed)
    n = g.n
    if mode == "dense":
        b = rng.standard_normal(n)
    elif mode == "sparse":
        nnz = int(nnz)
        if not 1 <= nnz <= n:
            raise InvalidParameter(f"nnz must lie in 1..{n}, got {nnz}")
        b = np.zeros(n)
        idx = rng.choice(n, nnz, replace=False)
        vals = rng.standard_normal(nnz)
        vals[vals == 0] = 1.0
        b[idx] = vals
    else:
        raise InvalidParameter(f"mode must be 'dense' or 'sparse', got {mode!r}")
    bc = b - b.mean()
    L = g.laplacian
    res = pcg(lambda v: L @ v, bc, diag=L.diagonal(), rtol=1e-12, max_iter=max(50 * n, 500))
    x = res.x - res.x.mean()
    return (x, b) if return_rhs else x


def random_walk_signal(g, starters=10, max_walks=1000, seed=None, decay=None):
    """Visit counts of decaying random walks launched from random starter nodes.

    Each starter gets a decay probability drawn uniformly from (0, 1) (or the
    fixed ``decay``) and a walk count drawn uniformly from ``0..max_walks``.
    A walk counts its starting node, then before every step stops with the
    decay probability, otherwise moves to a uniformly chosen neighbour.
    """
    rng = np.random.default_rng(seed)
    n = g.n
    starters = int(starters)
    if not 1 <= starters <= n:
        raise InvalidParameter(f"starters must lie in 1..{n}")
    if decay is not None and not 0 < decay <= 1:
        raise InvalidParameter("decay must lie in (0, 1]")
    indptr, nbr, _ = g.adjacency_csr
    deg = np.diff(indptr)
    counts = np.zeros(n, dtype=np.int64)
    nodes = rng.choice(n, starters, replace=False)
    for s in nodes:
        p = rng.uniform(0.0, 1.0) if decay is None else float(decay)
        walks = int(rng.integers(0, max_walks + 1))
        pos = np.full(walks, s, dtype=np.int64)
        counts[s] += walks
        while pos.size:
            pos = pos[(rng.random(pos.size) >= p) & (deg[pos] > 0)]
            if not pos.size:
                break
            pick = (rng.random(pos.size) * deg[pos]).astype(np.int64)
            pos = nbr[indptr[pos] + pick]
            np.add.at(counts, pos, 1)
    return counts.astype(float)


def add_noise(x, sigma, seed=None):
    x = np.asarray(x, dtype=float)
    if not sigma >= 0:
        raise InvalidParameter("sigma must be >= 0")
    if sigma == 0:
        return x.copy()
    return x + sigma * np.random.default_rng(seed).standard_normal(x.shape)


@dataclass
class SyntheticInstance:
    graph: object = field(repr=False)
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    sigma: float
    seed: int | None
    descriptor: dict

    def metadata(self):
        return {"generator": self.descriptor, "seed": self.seed, "sigma": self.sigma}


def make_instance(generator, g, sigma, seed=0, coords=None, nnz=30, starters=10, max_walks=1000):
    """Draw a truth signal with the named generator and add seeded noise.

    The signal and the noise use independent streams derived from ``seed``.
    """
    if generator not in GENERATORS:
        raise InvalidParameter(f"unknown generator {generator!r}; choose from {GENERATORS}")
    sig_seed, noise_seed = np.random.SeedSequence(seed).spawn(2)
    desc = {"name": generator}
    if generator == "mixture":
        C = spectral_coordinates(g) if coords is None else np.asarray(coords, dtype=float)
        x = gaussian_mixture_signal(C, random_mixture_centers(C, 5, sig_seed))
    elif generator.startswith("poisson"):
        mode = generator.split("-")[1]
        x = poisson_equation_signal(g, mode, nnz=nnz, seed=sig_seed)
        if mode == "sparse":
            desc["nnz"] = int(nnz)
    else:
        x = random_walk_signal(g, starters, max_walks, seed=sig_seed)
        desc.update(starters=int(starters), max_walks=int(max_walks))
    y = add_noise(x, sigma, noise_seed)
    return SyntheticInstance(g, x, y, float(sigma), seed, desc)
