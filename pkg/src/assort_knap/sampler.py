"""Random size-K assortments with prescribed marginals.

A fractional x with ||x||_1 <= K is padded with K dummy items of weight
1 - ||x||_1/K so the total is exactly K, then written as a convex
combination of K-subsets. Drawing one subset from that mixture yields a
random assortment z with ||z||_1 <= K and E[z] = x.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from . import kernels
from .core import CLIP_TOL, InputError

SUM_TOL = 1e-9
SNAP_TOL = 1e-9
# residual counters are O(1e-15); snapping any coarser leaks mass into extra rounds
COUNTER_TOL = 1e-12


@dataclass(frozen=True)
class BvnDecomposition:
    """Mixture weights over supports; supports list real products only (0-based)."""

    weights: np.ndarray
    supports: tuple

    def __len__(self):
        return len(self.supports)

    def marginals(self, n_products: int) -> np.ndarray:
        out = np.zeros(n_products)
        for w, sup in zip(self.weights, self.supports):
            out[list(sup)] += w
        return out

    def cumulative(self) -> list:
        return np.cumsum(self.weights).tolist()


def _prepare_list(x, K):
    # plain floats: these vectors are tiny and this runs once per epoch
    if K < 1 or int(K) != K:
        raise InputError(f"K must be a positive integer, got {K}")
    out = []
    total = 0.0
    for xi in np.asarray(x, dtype=float).reshape(-1).tolist():
        if not -CLIP_TOL <= xi <= 1 + CLIP_TOL:
            raise InputError("x must lie in [0, 1]^N")
        xi = 0.0 if xi < 0.0 else (1.0 if xi > 1.0 else xi)
        out.append(xi)
        total += xi
    if total > K + SUM_TOL:
        raise InputError(f"||x||_1 = {total} exceeds K = {K}")
    return out, total


def _prepare(x, K):
    out, total = _prepare_list(x, K)
    return np.array(out), total


def extend_with_dummies(x, K: int) -> np.ndarray:
    """Append K dummy entries of weight 1 - ||x||_1/K."""
    x, total = _prepare(x, K)
    dummy = min(1.0, max(0.0, 1.0 - total / K))
    return np.concatenate([x, np.full(K, dummy)])


def build_doubly_stochastic(x, K: int) -> np.ndarray:
    """(N+K)x(N+K) matrix: first K rows x_ext/K, last N rows (1 - x_ext)/N."""
    N = len(np.asarray(x).reshape(-1))
    ext = extend_with_dummies(x, K)
    M = np.empty((N + K, N + K))
    M[:K] = ext / K
    M[K:] = (1.0 - ext) / N
    return M


def reduced_bvn_decompose(x, K: int) -> BvnDecomposition:
    """O((N+K)^2) decomposition into at most N+K supports.

    Entries at 1 are placed in every support and entries at 0 in none; the
    remaining fractional entries (dummies included) are peeled off greedily,
    each round taking the K' items with the largest remaining mass.
    """
    xs, total = _prepare_list(x, K)
    N = len(xs)
    dummy = min(1.0, max(0.0, 1.0 - total / K))
    ext = xs + [dummy] * K
    forced = [i for i, e in enumerate(ext) if e >= 1.0 - SNAP_TOL]
    frac = [i for i, e in enumerate(ext) if SNAP_TOL < e < 1.0 - SNAP_TOL]
    k_left = K - len(forced)
    base = [i for i in forced if i < N]
    if k_left <= 0 or not frac:
        return BvnDecomposition(np.ones(1), (tuple(base),))
    vals = [ext[i] for i in frac]
    mass = sum(vals)
    if abs(mass - k_left) > 1e-6:
        raise InputError(f"fractional mass {mass} does not match remaining slots {k_left}")
    if mass != k_left:
        vals = [min(e * (k_left / mass), 1.0) for e in vals]
    status, weights, members = kernels.reduced_bvn(np.array(vals), int(k_left), COUNTER_TOL)
    if status != 0:
        raise RuntimeError(f"reduced BvN did not terminate within {len(vals) + 2} rounds")
    supports = []
    for row in members.tolist():
        picked = [frac[j] for j, hit in enumerate(row) if hit and frac[j] < N]
        supports.append(tuple(sorted(base + picked)))
    return BvnDecomposition(np.asarray(weights), tuple(supports))


def birkhoff_permutations(M, tol: float = 1e-12):
    """Classical Birkhoff decomposition via repeated perfect matchings.

    Returns ``(weights, perms)`` where ``perms[l][col] = row`` of the l-th
    permutation matrix.
    """
    R = np.array(M, dtype=float)
    n = R.shape[0]
    if R.shape != (n, n) or np.any(R < -tol):
        raise InputError("matrix must be square and nonnegative")
    if np.abs(R.sum(axis=0) - 1).max() > 1e-9 or np.abs(R.sum(axis=1) - 1).max() > 1e-9:
        raise InputError("matrix is not doubly stochastic")
    R[R <= tol] = 0.0
    weights, perms = [], []
    for _ in range(n * n + 1):
        if R.max() <= tol:
            break
        match = maximum_bipartite_matching(csr_matrix(R > tol), perm_type="row")
        if np.any(match < 0):
            raise InputError("no perfect matching on the positive entries")
        cols = np.arange(n)
        alpha = R[match, cols].min()
        R[match, cols] -= alpha
        R[R <= tol] = 0.0
        weights.append(alpha)
        perms.append(match.copy())
    return np.asarray(weights), perms


def generic_bvn_decompose(M, N: int, K: int) -> BvnDecomposition:
    """Reference decomposition of the padded matrix; products are read from the first K rows."""
    weights, perms = birkhoff_permutations(M)
    supports = tuple(tuple(int(c) for c in range(N) if perm[c] < K) for perm in perms)
    return BvnDecomposition(weights, supports)


def decompose(x, K: int, method: str = "reduced") -> BvnDecomposition:
    if method == "reduced":
        return reduced_bvn_decompose(x, K)
    if method == "generic":
        x, _ = _prepare(x, K)
        return generic_bvn_decompose(build_doubly_stochastic(x, K), len(x), K)
    raise InputError(f"unknown decomposition method {method!r}")


def draw_support(decomp: BvnDecomposition, u: float, cumulative=None) -> tuple:
    """Pick the support whose cumulative-weight interval contains u * total."""
    cum = decomp.cumulative() if cumulative is None else cumulative
    idx = bisect.bisect_right(cum, u * cum[-1])
    return decomp.supports[min(idx, len(cum) - 1)]


def sample_assortment(x, K: int, rng: np.random.Generator, method: str = "reduced") -> np.ndarray:
    """Indicator z in {0,1}^N with ||z||_1 <= K and E[z] = x."""
    x = np.asarray(x, dtype=float).reshape(-1)
    decomp = decompose(x, K, method)
    z = np.zeros(len(x), dtype=np.int8)
    z[list(draw_support(decomp, rng.random()))] = 1
    return z
