"""Dense bounded-variable simplex for the small LPs of the fluid model.

``solve_lp`` accepts general finite/infinite bounds and reduces them to
``0 <= x' <= u`` (shift, reflection, or split for free variables) before
handing the tableau to the compiled kernel.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import InputError

FEAS_TOL = 1e-9
OPT_TOL = 1e-9

STATUS_NAMES = {
    kernels.OPTIMAL: "optimal",
    kernels.INFEASIBLE: "infeasible",
    kernels.UNBOUNDED: "unbounded",
}


class SolverError(RuntimeError):
    """The simplex kernel gave up (iteration cap); carries diagnostics."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class LinearProgram:
    """maximize c.x  subject to  A x <= b,  lower <= x <= upper."""

    objective: np.ndarray
    constraint_matrix: np.ndarray
    constraint_rhs: np.ndarray
    lower_bounds: np.ndarray
    upper_bounds: np.ndarray

    @classmethod
    def build(cls, objective, constraint_matrix, constraint_rhs,
              lower_bounds=None, upper_bounds=None) -> "LinearProgram":
        c = np.asarray(objective, dtype=float).reshape(-1)
        n = c.shape[0]
        A = np.asarray(constraint_matrix, dtype=float)
        if A.size == 0:
            A = A.reshape(0, n)
        b = np.asarray(constraint_rhs, dtype=float).reshape(-1)
        lo = np.zeros(n) if lower_bounds is None else np.asarray(lower_bounds, dtype=float).reshape(-1)
        hi = np.full(n, np.inf) if upper_bounds is None else np.asarray(upper_bounds, dtype=float).reshape(-1)
        if A.ndim != 2 or A.shape[1] != n or A.shape[0] != b.shape[0]:
            raise InputError(f"dimension mismatch: c{c.shape}, A{A.shape}, b{b.shape}")
        if lo.shape != (n,) or hi.shape != (n,):
            raise InputError("bound vectors must match the number of variables")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise InputError("objective and constraints must be finite")
        if np.any(np.isnan(lo)) or np.any(np.isnan(hi)) or np.any(lo > hi):
            raise InputError("lower bounds must not exceed upper bounds")
        if np.any(lo == np.inf) or np.any(hi == -np.inf):
            raise InputError("bounds must admit a finite value")
        return cls(c, A, b, lo, hi)

    @property
    def shape(self):
        return self.constraint_matrix.shape


@dataclass(frozen=True)
class LpSolution:
    status: str
    x: np.ndarray
    objective_value: float
    active_constraints: frozenset = field(default_factory=frozenset)
    duals: np.ndarray | None = None
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def dual_bound(lp: LinearProgram, duals) -> float:
    """Weak-duality upper bound b.y + sum_j max(d_j l_j, d_j u_j) for y >= 0.

    ``d = c - A^T y`` are the reduced costs. Negative multipliers are clipped
    to zero so the bound stays valid for any input.
    """
    y = np.maximum(np.asarray(duals, dtype=float), 0.0)
    d = lp.objective - lp.constraint_matrix.T @ y
    total = float(lp.constraint_rhs @ y)
    for dj, lo, hi in zip(d, lp.lower_bounds, lp.upper_bounds):
        if abs(dj) <= 1e-12:
            continue
        if dj > 0:
            total += dj * hi if np.isfinite(hi) else np.inf
        elif dj < 0:
            total += dj * lo if np.isfinite(lo) else np.inf
    return total


def _max_iter(m, n):
    return 50 * (m + n) + 1000


def solve_lp(lp: LinearProgram, feas_tol: float = FEAS_TOL, opt_tol: float = OPT_TOL) -> LpSolution:
    """Solve ``lp`` to optimality, infeasibility or unboundedness.

    Raises SolverError if the pivoting does not finish within the cap.
    """
    c, A, b = lp.objective, lp.constraint_matrix, lp.constraint_rhs
    lo, hi = lp.lower_bounds, lp.upper_bounds
    m, n = A.shape

    # column map: original j -> (kernel column, sign, offset); free vars get a 2nd column
    cols_c, cols_A, cols_u = [], [], []
    mapping = []
    shift = np.zeros(n)
    for j in range(n):
        if np.isfinite(lo[j]):
            shift[j] = lo[j]
            mapping.append(((len(cols_c), 1.0),))
            cols_c.append(c[j])
            cols_A.append(A[:, j])
            cols_u.append(hi[j] - lo[j])
        elif np.isfinite(hi[j]):
            shift[j] = hi[j]
            mapping.append(((len(cols_c), -1.0),))
            cols_c.append(-c[j])
            cols_A.append(-A[:, j])
            cols_u.append(np.inf)
        else:
            mapping.append(((len(cols_c), 1.0), (len(cols_c) + 1, -1.0)))
            cols_c.extend([c[j], -c[j]])
            cols_A.extend([A[:, j], -A[:, j]])
            cols_u.extend([np.inf, np.inf])
    kc = np.array(cols_c, dtype=float)
    kA = np.column_stack(cols_A) if cols_A else np.zeros((m, 0))
    kA = np.ascontiguousarray(kA.reshape(m, len(cols_c)))
    kb = b - A @ shift
    ku = np.array(cols_u, dtype=float)

    status, kx, duals, iters = kernels.simplex(kc, kA, kb, ku, feas_tol, opt_tol,
                                               _max_iter(m, len(cols_c)))
    if status == kernels.ITERATION_LIMIT:
        raise SolverError("simplex iteration cap reached", iterations=iters, m=m, n=n)
    name = STATUS_NAMES[status]
    if status == kernels.INFEASIBLE:
        return LpSolution(name, np.full(n, np.nan), -np.inf, frozenset(), None, iters)

    x = shift.copy()
    for j, parts in enumerate(mapping):
        for col, sign in parts:
            x[j] += sign * kx[col]
    x = np.minimum(np.maximum(x, lo), hi)
    if status == kernels.UNBOUNDED:
        return LpSolution(name, x, np.inf, frozenset(), None, iters)
    slack = b - A @ x
    active = frozenset(int(i) for i in np.flatnonzero(slack <= feas_tol))
    return LpSolution(name, x, float(c @ x), active, np.asarray(duals), iters)


def solve_box_lp(c, A, b, feas_tol: float = FEAS_TOL, opt_tol: float = OPT_TOL) -> LpSolution:
    """Fast path for ``max c.x, A x <= b, 0 <= x <= 1`` with ``b >= 0``.

    Skips the bound bookkeeping of ``solve_lp``; used once per epoch by the
    re-solving policy.
    """
    m, n = A.shape
    status, x, duals, iters = kernels.simplex(c, A, b, np.ones(n), feas_tol, opt_tol,
                                              _max_iter(m, n))
    if status == kernels.ITERATION_LIMIT:
        raise SolverError("simplex iteration cap reached", iterations=iters, m=m, n=n)
    if status != kernels.OPTIMAL:
        # x = 0 is feasible whenever b >= 0 and the box is [0, 1]
        raise SolverError(f"unexpected LP status {STATUS_NAMES[status]}", m=m, n=n)
    x.clip(0.0, 1.0, out=x)
    slack = b - A @ x
    active = frozenset((slack <= feas_tol).nonzero()[0].tolist())
    return LpSolution("optimal", x, float(c @ x), active, duals, iters)
