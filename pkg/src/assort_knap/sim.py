"""Trajectory simulation, epoch traces and the trace-level sanity checks.

Demand is simulated one period at a time. Period t draws a uniform u_t from
the trajectory's demand stream and the customer buys the first offered
product (in ascending index order) whose cumulative preference exceeds
u_t * (1 + sum of offered preferences); otherwise nothing is bought. The compiled
epoch kernel and the step-by-step path below use the same rule, so both
produce identical trajectories for a given seed.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import kernels
from .core import Assortment, InputError, InventoryState, ModelInstance
from .fluid import fluid_benchmark
from .policy import PolicyKind, advance, initialize, notify_outcome, select_assortment

TRACE_TOL = 1e-8


class SimulationError(RuntimeError):
    """Internal consistency failure; ``trace`` holds whatever was recorded."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class EpochTrace:
    tau: int
    t_tau: int
    gamma: np.ndarray
    s: float
    s_raw: float
    x_tau: np.ndarray
    support: Assortment
    purchases: np.ndarray
    length: int
    revenue: float
    delta_i: np.ndarray
    delta: float
    eps_j: np.ndarray
    complete: bool

    @property
    def t_next(self) -> int:
        """Periods remaining when the following epoch starts."""
        return self.t_tau - self.length


@dataclass
class TrajectoryResult:
    total_revenue: float
    periods_used: int
    termination: str
    epochs: list
    fluid_benchmark: float
    regret: float
    seed: int
    purchases: np.ndarray = field(default=None, repr=False)
    final_inventory: np.ndarray = field(default=None, repr=False)
    epochs_completed: int = 0
    resolve_count: int = 0
    tau0: int = 0


def trajectory_streams(seed: int):
    """Independent (demand, sampling) generators for one trajectory."""
    demand, sampling = np.random.SeedSequence(int(seed)).spawn(2)
    return np.random.default_rng(demand), np.random.default_rng(sampling)


def simulate_period(instance: ModelInstance, assortment: Assortment, inventory: InventoryState,
                    rng=None, u=None):
    """One customer arrival. Returns the purchased product (0-based) or None.

    Every offered product must be individually in stock. A purchase is
    deducted from ``inventory`` in place; ``periods_elapsed`` always advances.
    """
    assortment.validate(instance)
    A, v = instance.consumption, instance.preferences
    for i in assortment:
        if np.any(inventory.remaining < A[i]):
            raise SimulationError(f"product {i} offered without enough inventory")
    if u is None:
        u = rng.random()
    denom = 1.0
    for i in assortment:
        denom += v[i]
    w = u * denom
    acc = 0.0
    chosen = None
    for i in assortment:
        acc += v[i]
        if w < acc:
            chosen = i
            break
    inventory.periods_elapsed += 1
    if chosen is not None:
        inventory.remaining -= A[chosen]
    return chosen


def make_trace(instance: ModelInstance, plan, purchases, length: int, complete: bool) -> EpochTrace:
    r, v, A = instance.revenues, instance.preferences, instance.consumption
    purchases = np.array(purchases, dtype=np.int64)
    delta_i = purchases - v * plan.x
    delta = float(delta_i.sum())
    t_next = plan.t_tau - length
    if complete and plan.tau > 1 and t_next > 0:
        cap = instance.max_consumption * instance.max_preference * instance.cardinality_cap
        eps_j = (A.T @ delta_i - np.minimum(plan.gamma, cap) * delta) / t_next
    else:
        eps_j = np.full(instance.n_resources, np.nan)
    return EpochTrace(
        tau=plan.tau, t_tau=plan.t_tau, gamma=plan.gamma, s=plan.s, s_raw=plan.s_raw,
        x_tau=plan.x, support=plan.support, purchases=purchases, length=int(length),
        revenue=float(r @ purchases), delta_i=delta_i, delta=delta, eps_j=eps_j,
        complete=bool(complete),
    )


def _finish(instance, state, purchases, inventory, t, epochs, n_ended, seed, fluid_value):
    if fluid_value is None:
        fluid_value = fluid_benchmark(instance)
    benchmark = instance.horizon * fluid_value
    revenue = float(instance.revenues @ purchases)
    return TrajectoryResult(
        total_revenue=revenue,
        periods_used=int(t),
        termination="inventory_depleted" if state.exhausted else "horizon",
        epochs=epochs,
        fluid_benchmark=benchmark,
        regret=benchmark - revenue,
        seed=int(seed),
        purchases=purchases,
        final_inventory=inventory,
        epochs_completed=int(n_ended),
        resolve_count=state.resolve_count,
        tau0=state.tau0,
    )


def _run_fast(instance: ModelInstance, kind: PolicyKind, seed: int, fluid_value, record_traces):
    demand, sampling = trajectory_streams(seed)
    T = instance.horizon
    u = demand.random(T)
    v = np.array(instance.preferences)
    A = np.array(instance.consumption)
    inv = np.array(instance.initial_inventory)
    inventory = InventoryState(inv, 0)
    purchases = np.zeros(instance.n_products, dtype=np.int64)
    state = initialize(instance, kind, sampling, inventory)
    drop = kind is not PolicyKind.RESOLVING
    epochs = []
    n_ended = 0
    t = 0
    while t < T and not state.exhausted:
        support = np.array(state.current_support.members, dtype=np.intp)
        stop = t + 1 if kind is PolicyKind.SAMPLING_PER_PERIOD else T
        epoch_buys = np.zeros(instance.n_products, dtype=np.int64)
        t_end, code = kernels.run_epoch(support, v, A, inv, u, t, stop, drop, epoch_buys)
        purchases += epoch_buys
        ended = code != kernels.HORIZON
        if code == kernels.NO_PURCHASE:
            n_ended += 1
        if record_traces and state.plan is not None:
            epochs.append(make_trace(instance, state.plan, epoch_buys, t_end - t,
                                     code == kernels.NO_PURCHASE))
        t = t_end
        inventory.periods_elapsed = t
        advance(state, ended, inventory, instance, sampling)
    return _finish(instance, state, purchases, inv, t, epochs, n_ended, seed, fluid_value)


def _run_stepwise(instance: ModelInstance, kind: PolicyKind, seed: int, fluid_value, record_traces):
    demand, sampling = trajectory_streams(seed)
    T = instance.horizon
    u = demand.random(T)
    inventory = InventoryState.initial(instance)
    purchases = np.zeros(instance.n_products, dtype=np.int64)
    state = initialize(instance, kind, sampling, inventory)
    epochs = []
    n_ended = 0
    serial = state.epoch_serial
    plan, epoch_buys, epoch_start = state.plan, np.zeros_like(purchases), 0
    t = 0
    while t < T and not state.exhausted:
        offer = select_assortment(state, inventory, instance, sampling)
        outcome = simulate_period(instance, offer, inventory, u=u[t])
        t += 1
        if np.any(inventory.remaining < 0):
            raise SimulationError("inventory went negative", epochs)
        if outcome is not None:
            purchases[outcome] += 1
            epoch_buys[outcome] += 1
        else:
            n_ended += 1
        notify_outcome(state, outcome, inventory, instance, sampling)
        new_epoch = state.epoch_serial != serial or state.exhausted or t == T
        if record_traces and plan is not None and new_epoch:
            epochs.append(make_trace(instance, plan, epoch_buys, t - epoch_start, outcome is None))
        if state.epoch_serial != serial:
            serial = state.epoch_serial
            plan, epoch_buys, epoch_start = state.plan, np.zeros_like(purchases), t
    return _finish(instance, state, purchases, inventory.remaining, t, epochs, n_ended, seed,
                   fluid_value)


def run_trajectory(instance: ModelInstance, kind, seed: int, *, fluid_value: float | None = None,
                   record_traces: bool = True, stepwise: bool = False) -> TrajectoryResult:
    """Simulate one trajectory of ``kind`` under ``seed``.

    ``fluid_value`` is Phi(gamma_0) and is computed when omitted. The
    default path hands whole epochs to the compiled kernel; ``stepwise``
    drives the public policy interface period by period instead and gives
    the same result.
    """
    kind = PolicyKind.parse(kind)
    runner = _run_stepwise if stepwise else _run_fast
    result = runner(instance, kind, seed, fluid_value, record_traces)
    used = instance.initial_inventory - result.final_inventory
    expected = instance.consumption.T @ result.purchases
    if np.any(result.final_inventory < 0) or not np.allclose(used, expected, rtol=0, atol=1e-9):
        raise SimulationError("inventory accounting does not match purchases", result.epochs)
    return result


# ---------------------------------------------------------------------------
# trace checks


@dataclass(frozen=True)
class RecursionCheck:
    ok: bool
    pairs_checked: int
    failed_epoch: int | None = None
    detail: str = ""


def check_recursion(traces, instance: ModelInstance | None = None, tol: float = TRACE_TOL) -> RecursionCheck:
    """Pathwise s and gamma recursions between consecutive epochs tau and tau - 1.

    A pair is checked when epoch tau ended by a no-purchase, the next epoch
    carries index tau - 1, and s^tau was not clamped up to 1.
    """
    checked = 0
    for k in range(len(traces) - 1):
        cur, nxt = traces[k], traces[k + 1]
        if not cur.complete or cur.tau <= 1 or nxt.tau != cur.tau - 1 or cur.s_raw < 1.0:
            continue
        checked += 1
        bound = cur.s - cur.delta / (cur.tau - 1)
        if nxt.s_raw < bound - tol:
            return RecursionCheck(False, checked, k, f"s: {nxt.s_raw} < {bound}")
        eps = cur.eps_j
        if np.any(np.isnan(eps)):
            continue
        gap = nxt.gamma - (cur.gamma - eps)
        if np.any(gap < -tol):
            j = int(np.argmin(gap))
            return RecursionCheck(False, checked, k, f"gamma[{j}]: shortfall {-gap[j]}")
    return RecursionCheck(True, checked)


@dataclass(frozen=True)
class MeanCheck:
    key: tuple
    mean: float
    se: float
    count: int
    target: float
    ok: bool
    tested: bool = True


MIN_COUNT = 30


class _Moments:
    __slots__ = ("n", "total", "total_sq")

    def __init__(self, size):
        self.n = np.zeros(size, dtype=np.int64)
        self.total = np.zeros(size)
        self.total_sq = np.zeros(size)

    def add(self, values, mask=None):
        values = np.asarray(values, dtype=float)
        if mask is None:
            mask = np.ones(values.shape, dtype=bool)
        self.n += mask
        self.total += np.where(mask, values, 0.0)
        self.total_sq += np.where(mask, values * values, 0.0)

    def checks(self, key_prefix, targets, n_se, min_count=MIN_COUNT):
        # groups smaller than min_count are reported untested: their SE is too noisy to use
        out = []
        for i in range(len(self.n)):
            n = int(self.n[i])
            mean = self.total[i] / n if n else float("nan")
            if n > 1:
                var = max(self.total_sq[i] - n * mean * mean, 0.0) / (n - 1)
                se = math.sqrt(var / n)
            else:
                se = 0.0
            diff = abs(mean - targets[i])
            tested = n >= min_count
            ok = not tested or (diff <= n_se * se if se > 0 else diff <= 1e-12)
            out.append(MeanCheck(key_prefix + (i,), float(mean), se, n, float(targets[i]),
                                 bool(ok), tested))
        return out


def untruncatable(ep: EpochTrace, consumption, preferences, prob: float = 1e-6) -> bool:
    """True when, from its starting state, the epoch could be cut short only with probability < prob.

    An epoch with total offered preference V makes Q or more sales with
    probability (V/(1+V))^Q. If Q periods remain and every resource covers
    Q+1 sales of the hungriest offered product, neither the horizon nor
    depletion can end it before its no-purchase.
    """
    members = list(ep.support)
    if not members:
        return ep.t_tau >= 1
    V = float(preferences[members].sum())
    if V <= 0:
        return ep.t_tau >= 1
    q = math.ceil(math.log(prob) / math.log(V / (1.0 + V)))
    stock = ep.gamma * ep.t_tau
    return ep.t_tau > q and bool(np.all(stock >= (q + 1) * consumption[members].max(axis=0)))


class TraceAccumulator:
    """Streams re-solving trajectories through the trace checks without keeping them.

    The geometric-law sample keeps complete epochs that ``untruncatable``
    admits from their starting state; dropping the epochs that depletion cut
    short would otherwise bias the counts downward.
    """

    def __init__(self, n_products: int, preferences=None, consumption=None, n_se: float = 4.0):
        self.n_products = n_products
        self.preferences = None if preferences is None else np.asarray(preferences, dtype=float)
        self.consumption = None if consumption is None else np.asarray(consumption, dtype=float)
        self.n_se = n_se
        self.trajectories = 0
        self.pairs_checked = 0
        self.recursion_failures = []
        self.first = {}
        self.by_tau = {}
        self.geometric = _Moments(n_products)

    def add(self, result: TrajectoryResult) -> None:
        N = self.n_products
        rec = check_recursion(result.epochs)
        self.pairs_checked += rec.pairs_checked
        if not rec.ok:
            self.recursion_failures.append((self.trajectories, rec))
        self.trajectories += 1
        for k, ep in enumerate(result.epochs):
            if not ep.complete:
                continue
            if k == 0:
                self.first.setdefault(ep.tau, _Moments(N)).add(ep.delta_i)
            self.by_tau.setdefault(ep.tau, _Moments(N)).add(ep.delta_i)
            if self.consumption is not None and untruncatable(ep, self.consumption, self.preferences):
                self.geometric.add(ep.purchases, ep.support.indicator(N).astype(bool))

    def delta_checks(self, first_epoch_only: bool = True) -> list:
        groups = self.first if first_epoch_only else self.by_tau
        zeros = np.zeros(self.n_products)
        return [c for tau in sorted(groups) for c in groups[tau].checks((tau,), zeros, self.n_se)]

    def geometric_checks(self) -> list:
        if self.preferences is None:
            raise InputError("geometric-law check needs the preference vector")
        return self.geometric.checks((), self.preferences, self.n_se)


def check_delta_centered(results, first_epoch_only: bool = True, n_se: float = 4.0) -> list:
    """Mean of Delta^tau(i) over complete epochs, grouped by (tau, i), against 0.

    With ``first_epoch_only`` just the opening epoch of each trajectory is
    used; its (gamma, s) are deterministic so the unconditional mean is 0.
    """
    results = list(results)
    if not results:
        return []
    acc = TraceAccumulator(len(results[0].purchases), n_se=n_se)
    for res in results:
        acc.add(res)
    return acc.delta_checks(first_epoch_only)


def check_geometric_law(results, instance: ModelInstance, n_se: float = 4.0) -> list:
    """Mean n^tau(i) over untruncatable complete epochs offering i, against v_i."""
    acc = TraceAccumulator(instance.n_products, instance.preferences, instance.consumption, n_se)
    for res in results:
        acc.add(res)
    return acc.geometric_checks()


def cumulative_deltas(traces) -> tuple:
    """Running sums of Delta^tau and eps^tau(j) over complete epochs."""
    d, e = [], []
    acc_d = 0.0
    acc_e = None
    for ep in traces:
        if not ep.complete:
            continue
        acc_d += ep.delta
        eps = np.nan_to_num(ep.eps_j)
        acc_e = eps.copy() if acc_e is None else acc_e + eps
        d.append(acc_d)
        e.append(acc_e.copy())
    return np.array(d), np.array(e)


# ---------------------------------------------------------------------------
# exact oracle for toy instances

DP_MAX_UNITS = 20
DP_MAX_GRID = 20


def _common_grid(values) -> int:
    for D in range(1, DP_MAX_GRID + 1):
        scaled = np.asarray(values) * D
        if np.allclose(scaled, np.round(scaled), rtol=0, atol=1e-9):
            return D
    raise InputError("consumption and inventory are not on a common grid with denominator <= 20")


def tiny_dp_value(instance: ModelInstance) -> float:
    """Optimal expected revenue by backward induction over integer inventory units."""
    N, M, T, K = instance.n_products, instance.n_resources, instance.horizon, instance.cardinality_cap
    if N > 3 or M > 2 or T > 10:
        raise InputError("tiny_dp_value needs N <= 3, M <= 2, T <= 10")
    D = _common_grid(np.concatenate([instance.consumption.ravel(), instance.initial_inventory]))
    units0 = tuple(int(round(c * D)) for c in instance.initial_inventory)
    if max(units0) > DP_MAX_UNITS:
        raise InputError(f"inventory exceeds {DP_MAX_UNITS} grid units per resource")
    need = [tuple(int(round(a * D)) for a in row) for row in instance.consumption]
    r, v = instance.revenues, instance.preferences
    subsets = [S for k in range(1, K + 1) for S in itertools.combinations(range(N), k)]

    @lru_cache(maxsize=None)
    def value(t, units):
        if t == T:
            return 0.0
        stay = value(t + 1, units)
        best = stay
        for S in subsets:
            if any(need[i][j] > units[j] for i in S for j in range(M)):
                continue
            denom = 1.0 + sum(v[i] for i in S)
            total = stay
            for i in S:
                after = tuple(units[j] - need[i][j] for j in range(M))
                total += v[i] * (r[i] + value(t + 1, after))
            best = max(best, total / denom)
        return best

    return float(value(0, units0))
