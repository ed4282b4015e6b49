"""Fluid approximation: fractional-programming bisection and the re-solving LP.

Both problems keep the resource constraint in linearized form

    sum_i (A_ij - gamma_j) v_i x_i <= gamma_j

which is ``A^T nu(x) <= gamma`` multiplied through by ``1 + v.x``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import InputError, ModelInstance
from .linprog import LpSolution, solve_box_lp

BENCHMARK_EPSILON = 1e-9
ACCEPT_SLACK = 1e-12


@dataclass(frozen=True)
class FractionalSolution:
    """A fractional assortment x in [0,1]^N with its objective.

    For the ratio problem ``objective`` is R(x); for the re-solving LP it is
    the un-normalized sum r_i v_i x_i.
    """

    x: np.ndarray
    objective: float
    denominator: float
    lambda_final: float | None = None
    active_constraints: frozenset = field(default_factory=frozenset)
    lp_solves: int = 0
    brackets: tuple = ()


def _check_gamma(instance: ModelInstance, gamma) -> np.ndarray:
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != (instance.n_resources,):
        gamma = gamma.reshape(-1)
        if gamma.shape != (instance.n_resources,):
            raise InputError(f"gamma must have length {instance.n_resources}")
    # min() is nan if any entry is nan, and the sum is inf if any entry is
    if not gamma.min() >= 0.0 or not math.isfinite(gamma.sum()):
        raise InputError("gamma must be finite and nonnegative")
    return gamma


def _constraint_rows(instance: ModelInstance, gamma: np.ndarray, extra: int = 0):
    """Cardinality row, one linearized row per resource, then ``extra`` blank rows."""
    v = instance.preferences
    M = instance.n_resources
    A = np.empty((1 + M + extra, instance.n_products))
    b = np.empty(1 + M + extra)
    A[0] = 1.0
    np.multiply(instance.consumption.T - gamma[:, None], v, out=A[1:1 + M])
    b[0] = instance.cardinality_cap
    b[1:1 + M] = gamma
    return A, b


def lambda_lp(instance: ModelInstance, gamma, lam: float) -> LpSolution:
    """Maximize sum (r_i - lam) v_i x_i over the linearized fluid polytope."""
    gamma = _check_gamma(instance, gamma)
    if not 0.0 <= lam <= 1.0:
        raise InputError(f"lambda must lie in [0, 1], got {lam}")
    A, b = _constraint_rows(instance, gamma)
    c = (instance.revenues - lam) * instance.preferences
    return solve_box_lp(c, A, b)


def solve_phi(instance: ModelInstance, gamma, epsilon: float = BENCHMARK_EPSILON) -> FractionalSolution:
    """Approximately maximize R(x) subject to cardinality and resource constraints.

    Bisection on the revenue level lam in [0, 1]; each step solves one LP
    and keeps the last accepted LP solution. The returned x is feasible and
    satisfies R(x) >= Phi(gamma) - epsilon.
    """
    if not 0.0 < epsilon < 1.0:
        raise InputError(f"epsilon must lie in (0, 1), got {epsilon}")
    gamma = _check_gamma(instance, gamma)
    A, b = _constraint_rows(instance, gamma)
    r, v = instance.revenues, instance.preferences

    lam_lo, lam_hi = 0.0, 1.0
    x_hat = np.zeros(instance.n_products)
    active = frozenset()
    brackets = [(lam_lo, lam_hi)]
    solves = 0
    # strict '>' so the LP count is exactly ceil(log2(1/epsilon)), dyadic epsilon included
    while lam_hi - lam_lo > epsilon:
        lam = 0.5 * (lam_lo + lam_hi)
        sol = solve_box_lp((r - lam) * v, A, b)
        solves += 1
        if sol.objective_value >= lam - ACCEPT_SLACK:
            lam_lo = lam
            x_hat = sol.x
            active = sol.active_constraints
        else:
            lam_hi = lam
        brackets.append((lam_lo, lam_hi))

    vx = v * x_hat
    denom = 1.0 + float(vx.sum())
    return FractionalSolution(
        x=x_hat,
        objective=float(r @ vx) / denom,
        denominator=denom,
        lambda_final=lam_lo,
        active_constraints=active,
        lp_solves=solves,
        brackets=tuple(brackets),
    )


def psi_rows(instance: ModelInstance, gamma: np.ndarray, s: float):
    if math.isinf(s):
        return _constraint_rows(instance, gamma)
    A, b = _constraint_rows(instance, gamma, extra=1)
    A[-1] = instance.preferences
    b[-1] = s - 1.0
    return A, b


def solve_psi(instance: ModelInstance, gamma, s: float) -> FractionalSolution:
    """Maximize sum r_i v_i x_i with the MNL denominator budgeted: 1 + v.x <= s.

    ``s = inf`` drops the budget row. Callers must clamp s >= 1.
    """
    gamma = _check_gamma(instance, gamma)
    if not s >= 1.0:
        raise InputError(f"denominator budget must be >= 1, got {s}")
    A, b = psi_rows(instance, gamma, s)
    sol = solve_box_lp(instance.revenues * instance.preferences, A, b)
    return FractionalSolution(
        x=sol.x,
        objective=sol.objective_value,
        denominator=1.0 + float(instance.preferences @ sol.x),
        active_constraints=sol.active_constraints,
        lp_solves=1,
    )


def lemma1_check(instance: ModelInstance, gamma, epsilon: float = BENCHMARK_EPSILON) -> float:
    """|Phi(gamma) - Psi(gamma, s*)/s*| with s* the denominator of the ratio solution."""
    phi = solve_phi(instance, gamma, epsilon)
    s_star = phi.denominator
    psi = solve_psi(instance, gamma, s_star)
    return abs(phi.objective - psi.objective / s_star)


def fluid_benchmark(instance: ModelInstance) -> float:
    """Phi(gamma_0) at benchmark precision."""
    return solve_phi(instance, instance.gamma0, BENCHMARK_EPSILON).objective
