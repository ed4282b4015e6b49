import itertools

import numpy as np
import pytest

from assort_knap.core import ModelInstance
from assort_knap.linprog import LinearProgram


def random_instance(rng, N=5, M=2, K=2, T=100, gamma_hi=0.1):
    """Same distributions as the harness generator, drawn from ``rng``."""
    v = rng.uniform(0, 1, N)
    C0 = rng.uniform(1e-3, gamma_hi, M) * T
    A = rng.uniform(0, 1 / K, (N, M))
    r = rng.uniform(0, 1, N)
    return ModelInstance(N, M, K, T, r, v, A, C0)


def random_box_lp(rng, n, m):
    """Feasible by construction; negative lower bounds exercise phase 1 after the shift."""
    c = rng.normal(size=n)
    A = rng.normal(size=(m, n))
    lo = rng.uniform(-1, 0, n)
    hi = lo + rng.uniform(0.2, 2, n)
    x0 = rng.uniform(lo, hi)
    b = A @ x0 + rng.uniform(0, 1, m)
    return LinearProgram.build(c, A, b, lo, hi)


def vertex_enumeration(c, A, b, lo, hi):
    """Brute-force LP optimum over all basic solutions of max c.x, Ax <= b, lo <= x <= hi.

    Each basic solution fixes n - k variables at a bound and makes k rows
    of A tight, solving for the k free variables. All bound patterns of one
    (rows, free) choice are solved together. Returns -inf if infeasible.
    """
    c, A, b = np.asarray(c, float), np.asarray(A, float), np.asarray(b, float)
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    m, n = A.shape
    best = -np.inf
    for k in range(0, min(m, n) + 1):
        for free in itertools.combinations(range(n), k):
            fixed = [j for j in range(n) if j not in free]
            pats = np.array(list(itertools.product((0, 1), repeat=len(fixed))), dtype=bool)
            base = np.empty((len(pats), n))
            base[:, fixed] = np.where(pats, hi[fixed], lo[fixed]) if fixed else 0.0
            for rows in itertools.combinations(range(m), k):
                X = base.copy()
                if k:
                    B = A[np.ix_(rows, free)]
                    if abs(np.linalg.det(B)) < 1e-10:
                        continue
                    rhs = b[list(rows)][:, None] - A[np.ix_(rows, fixed)] @ X[:, fixed].T
                    X[:, list(free)] = np.linalg.solve(B, rhs).T
                ok = np.all(X @ A.T <= b + 1e-9, axis=1)
                ok &= np.all(X >= lo - 1e-9, axis=1) & np.all(X <= hi + 1e-9, axis=1)
                if ok.any():
                    best = max(best, float((X[ok] @ c).max()))
    return best


def grid_phi(instance, gamma, step=1e-3):
    """Max R(x) over a grid on [0,1]^2 restricted to feasible points (N = 2 only)."""
    assert instance.n_products == 2
    g = np.linspace(0, 1, int(round(1 / step)) + 1)
    x1, x2 = np.meshgrid(g, g, indexing="ij")
    v, r, A = instance.preferences, instance.revenues, instance.consumption
    vx1, vx2 = v[0] * x1, v[1] * x2
    den = 1 + vx1 + vx2
    ok = (x1 + x2) <= instance.cardinality_cap + 1e-12
    for j in range(instance.n_resources):
        ok &= A[0, j] * vx1 + A[1, j] * vx2 <= gamma[j] * den + 1e-12
    R = (r[0] * vx1 + r[1] * vx2) / den
    return float(R[ok].max())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def two_product():
    """N=2, M=1, r=(1.0, 0.6), v=(1, 1), K=2, A=(1.0; 0.2), gamma = 0.25."""
    return ModelInstance(2, 1, 2, 4, [1.0, 0.6], [1.0, 1.0], [[1.0], [0.2]], [1.0])
